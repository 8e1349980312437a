"""Invariant suite for denoisers and state evolution.

Each check returns a :class:`CheckResult`; :func:`run_all` runs the whole
suite (used by ``mlama validate`` and the test-suite).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .constellation import from_key
from .denoisers import FAMILIES, Denoiser, _split, f_clip, f_exact, f_hypercube
from .se import psi_mm
from .tuning import TuningPolicy, default_policy, tune_tau

__all__ = [
    "CheckResult",
    "check_derivatives",
    "check_g_monotone",
    "check_hypercube_limit",
    "check_separability",
    "check_sign_change",
    "check_tau_optimality",
    "fd_derivative",
    "run_all",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def fd_derivative(den, r, tau, h=1e-4):
    """Five-point finite-difference counterpart of ``den(r, tau)[1]``.

    For complex inputs the real-part response to a real shift and the
    imaginary-part response to an imaginary shift are averaged, which is the
    per-dimension combination used by the Onsager term.
    """

    def d(shift, part):
        f = lambda k: part(den(r + k * shift, tau)[0])  # noqa: E731
        return (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)

    if not den.constellation.is_complex:
        return d(h, np.real)
    return 0.5 * (d(h, np.real) + d(1j * h, np.imag))


def _near(x, points, eps):
    if len(points) == 0:
        return np.zeros(np.shape(x), dtype=bool)
    return np.min(np.abs(np.asarray(x)[..., None] - np.asarray(points)), axis=-1) < eps


@_timed
def check_derivatives(keys=("qpsk", "16qam", "4pam"), taus=(0.05, 0.5, 5.0), n=49, tol=1e-5):
    """Analytic ``F'`` against finite differences on ``[-6, 6]^2``.

    Kinked families are checked away from their kinks.
    """
    g = np.linspace(-6, 6, n)
    worst = 0.0
    where = ""
    for key in keys:
        c = from_key(key)
        r = (g[:, None] + 1j * g[None, :]).ravel() if c.is_complex else g
        for fam in FAMILIES:
            if fam.startswith("gray") and c.M not in (2, 4):
                continue
            den = Denoiser(fam, c)
            keep = np.ones(r.shape, dtype=bool)
            if den.kinked:
                bp = den.breakpoints()
                keep = ~_near(r.real, bp, 1e-3)
                if c.is_complex:
                    keep &= ~_near(r.imag, bp, 1e-3)
            for tau in taus:
                err = np.abs(den(r[keep], tau)[1] - fd_derivative(den, r[keep], tau))
                if err.max() > worst:
                    worst = float(err.max())
                    where = f"{fam}/{key}/tau={tau:g}"
    return CheckResult("derivative-fd", worst <= tol, f"max |F' - FD| = {worst:.2e} at {where} (tol {tol:g})")


@_timed
def check_hypercube_limit(tau=1e-6, n=241, tol=1e-3):
    """``f_hypercube(r, tau -> 0)`` approaches ``f_clip``."""
    g = np.linspace(-6, 6, n)
    r = (g[:, None] + 1j * g[None, :]).ravel()
    worst = 0.0
    for alpha in (1.0, 3.0, 7.0):
        err = np.abs(f_hypercube(r, tau, alpha)[0] - f_clip(r, alpha)[0])
        worst = max(worst, float(err.max()))
    return CheckResult("hypercube-clip-limit", worst <= tol, f"sup error {worst:.2e} at tau={tau:g} (tol {tol:g})")


@_timed
def check_separability(tol=1e-9):
    """Per-dimension and full complex-plane evaluations agree.

    Compares the full-alphabet exact posterior mean with the product of its
    real PAM components pointwise, and ``psi_mm`` via its separable route
    with direct 2-D integration, for every family.
    """
    worst_f = 0.0
    worst_psi = 0.0
    g = np.linspace(-6, 6, 37)
    r = (g[:, None] + 1j * g[None, :]).ravel()
    for key in ("qpsk", "16qam"):
        c = from_key(key)
        pam = c.real_component()
        for tau in (0.05, 0.5, 5.0):
            full = f_exact(r, tau, c)
            sep = _split(r, lambda x: f_exact(x, tau / 2.0, pam), real=False)
            worst_f = max(worst_f, float(np.max(np.abs(full[0] - sep[0]))), float(np.max(np.abs(full[1] - sep[1]))))
        for fam in FAMILIES:
            den = Denoiser(fam, c)
            for s2, tau in ((0.1, 0.1), (0.8, 0.3), (3.0, 4.0)):
                a = psi_mm(s2, tau, den, route="separable")
                b = psi_mm(s2, tau, den, route="2d")
                worst_psi = max(worst_psi, abs(a - b))
    worst = max(worst_f, worst_psi)
    return CheckResult(
        "separability", worst <= tol, f"pointwise {worst_f:.2e}, psi {worst_psi:.2e} (tol {tol:g})"
    )


@_timed
def check_sign_change(sigma2s=(0.05, 0.3, 1.0, 4.0), n=400):
    """``d psi / d tau`` of the Gaussian family changes sign once, at ``tau = sigma2``."""
    bad = []
    for key in ("qpsk", "16qam"):
        den = Denoiser("gaussian", from_key(key))
        for s2 in sigma2s:
            taus = np.logspace(np.log10(s2) - 3, np.log10(s2) + 3, n)
            h = 1e-5 * taus
            slope = np.array([psi_mm(s2, t + d, den) - psi_mm(s2, t - d, den) for t, d in zip(taus, h)])
            sgn = np.sign(slope)
            flips = np.nonzero(sgn[1:] != sgn[:-1])[0]
            ok = len(flips) == 1 and taus[flips[0]] <= s2 * (1 + 1e-9) and taus[flips[0] + 1] >= s2 * (1 - 1e-9)
            if not ok:
                bad.append(f"{key}/sigma2={s2:g}: {len(flips)} sign changes")
    return CheckResult("gaussian-sign-change", not bad, "; ".join(bad) or "one sign change at tau = sigma2 in every case")


@_timed
def check_tau_optimality(n_grid=1000, tol=1e-10):
    """``psi(sigma2, tau*) <= psi(sigma2, tau)`` on a dense ``tau`` grid."""
    worst = -np.inf
    where = ""
    cases = [("hypercube", "qpsk"), ("hypercube", "16qam"), ("gaussian", "16qam"), ("exact", "qpsk"), ("exact", "4pam")]
    for fam, key in cases:
        den = Denoiser(fam, from_key(key))
        for s2 in (0.05, 0.3, 1.0, 3.0):
            tstar = float(tune_tau(s2, den, TuningPolicy("optimal")))
            best = psi_mm(s2, tstar, den)
            grid = np.logspace(np.log10(1e-4 * s2), np.log10(1e2 * (s2 + den.Es)), n_grid)
            gmin = min(psi_mm(s2, t, den) for t in grid)
            if best - gmin > worst:
                worst = best - gmin
                where = f"{fam}/{key}/sigma2={s2:g}"
    return CheckResult(
        "tau-optimality", worst <= tol, f"max psi(tau*) - min_grid psi = {worst:.2e} at {where} (tol {tol:g})"
    )


@_timed
def check_g_monotone(n=200):
    """``g(s2) = s2 - beta psi*(s2)`` is strictly increasing below the MRT."""
    cases = [("clip", "qpsk", 1.9), ("clip", "16qam", 1.3), ("gaussian", "qpsk", 0.95), ("gaussian", "16qam", 0.95)]
    grid = np.logspace(-6, 2, n)
    bad = []
    for fam, key, beta in cases:
        den = Denoiser(fam, from_key(key))
        pol = default_policy(fam)
        g = np.array([s2 - beta * psi_mm(s2, float(tune_tau(s2, den, pol)), den) for s2 in grid])
        if not np.all(np.diff(g) > 0):
            bad.append(f"{fam}/{key}/beta={beta:g}")
    return CheckResult("g-monotone", not bad, "not increasing: " + ", ".join(bad) if bad else f"{len(cases)} cases increasing")


def run_all():
    """Run every check and return the list of results."""
    return [
        check_derivatives(),
        check_hypercube_limit(),
        check_separability(),
        check_sign_change(),
        check_tau_optimality(),
        check_g_monotone(),
    ]
