"""State evolution: mismatched MSE, SE trajectories, fixed points, MRT and SER.

The decoupled model is ``R = S0 + sigma Z`` with ``Z ~ CN(0, 1)`` for complex
alphabets and ``Z ~ N(0, 1)`` for real PAM.  Expectations over ``S0`` are
exact sums over the alphabet; expectations over ``Z`` use the
breakpoint-aware rule in :mod:`mlama.special`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation
from .denoisers import Denoiser, f_exact
from .exceptions import AnalysisError
from .special import Phi, Q, gaussian_rule
from .tuning import TuningPolicy, default_policy, tune_tau

__all__ = [
    "Phi",
    "Q",
    "SeTrajectory",
    "fixed_point",
    "mrt",
    "pam_ser",
    "psi_mm",
    "psi_pam_clip",
    "psi_qam_clip",
    "se_trajectory",
    "ser_predict",
    "write_trajectory_csv",
]

_SQRTPI = np.sqrt(np.pi)
_SQRT2PI = np.sqrt(2.0 * np.pi)


def _psi_real(sigma2, tau, den):
    c = den.constellation
    bps = den.breakpoints()
    std = np.sqrt(sigma2)
    total = 0.0
    for a, p in zip(c.points, c.prior_probs):
        x, w = gaussian_rule(a, std, bps)
        m, _ = den(x, tau)
        total += p * np.dot(w, (m - a) ** 2)
    return float(total)


def _psi_complex_2d(sigma2, tau, den):
    c = den.constellation
    bps = den.breakpoints()
    std = np.sqrt(sigma2 / 2.0)
    total = 0.0
    for a, p in zip(c.points, c.prior_probs):
        xr, wr = gaussian_rule(a.real, std, bps)
        xi, wi = gaussian_rule(a.imag, std, bps)
        r = xr[:, None] + 1j * xi[None, :]
        if den.family == "exact":
            m, _ = f_exact(r, tau, c)
        else:
            m, _ = den(r, tau)
        total += p * np.einsum("i,j,ij->", wr, wi, np.abs(m - a) ** 2)
    return float(total)


def psi_mm(sigma2, tau, denoiser, route="auto"):
    """Mismatched MSE ``E|F(S0 + sigma Z, tau) - S0|^2``.

    Parameters
    ----------
    sigma2 : float
        Decoupled noise variance.
    tau : float
        Denoiser variance parameter (0 and inf allowed where the family has
        a limit).
    denoiser : Denoiser
    route : {"auto", "separable", "2d"}
        ``auto`` uses the per-dimension reduction
        ``psi(s2, t) = 2 psi_R(s2/2, t/2)`` whenever the alphabet is
        separable; ``2d`` integrates over the complex plane directly.
    """
    if sigma2 < 0:
        raise AnalysisError("sigma2 must be >= 0")
    c = denoiser.constellation
    if not c.is_complex:
        val = _psi_real(sigma2, tau, denoiser)
    elif route != "2d" and c.is_separable():
        val = 2.0 * _psi_real(sigma2 / 2.0, tau / 2.0, denoiser.per_dimension())
    elif route == "separable":
        raise AnalysisError("separable route requested for a non-separable alphabet")
    else:
        val = _psi_complex_2d(sigma2, tau, denoiser)
    if not np.isfinite(val):
        raise AnalysisError(f"non-finite MSE at sigma2={sigma2:g}, tau={tau:g}")
    return val


def psi_pam_clip(sigma2, M):
    """Closed-form MSE of clipping for unit-grid M-PAM in real noise of variance ``sigma2``."""
    if sigma2 <= 0:
        return 0.0
    s = np.sqrt(sigma2)
    alpha = M - 1
    acc = 0.0
    for k in range(1, M // 2 + 1):
        ab = alpha - (2 * k - 1)
        ak = alpha + (2 * k - 1)
        acc += (
            (ab**2 - sigma2) * Q(ab / s)
            + (ak**2 - sigma2) * Q(ak / s)
            - s / _SQRT2PI * ab * np.exp(-(ab**2) / (2 * sigma2))
            - s / _SQRT2PI * ak * np.exp(-(ak**2) / (2 * sigma2))
        )
    return float(sigma2 + 2.0 / M * acc)


def psi_qam_clip(sigma2, M):
    """Closed-form MSE of clipping for unit-grid M^2-QAM in complex noise of variance ``sigma2``."""
    if sigma2 <= 0:
        return 0.0
    s = np.sqrt(sigma2)
    alpha = M - 1
    acc = 0.0
    for k in range(1, M // 2 + 1):
        ab = alpha - (2 * k - 1)
        ak = alpha + (2 * k - 1)
        acc += (
            sigma2
            + (2 * ab**2 - sigma2) * Q(ab / (s / np.sqrt(2)))
            - s / _SQRTPI * (ab * np.exp(-(ab**2) / sigma2) + ak * np.exp(-(ak**2) / sigma2))
            + (2 * ak**2 - sigma2) * Q(ak / (s / np.sqrt(2)))
        )
    return float(2.0 / M * acc)


def pam_ser(sigma, M, d=1.0):
    """Error rate of nearest-level decisions for M-PAM in real noise of std ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 * (1.0 - 1.0 / M) * Q(d / sigma)


def ser_predict(sigma2, c):
    """Symbol-error rate of slicing ``S0 + sigma Z`` back onto the alphabet."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if not c.is_complex:
        return pam_ser(np.sqrt(sigma2), c.M, c.scale)
    p_dim = pam_ser(np.sqrt(sigma2 / 2.0), c.M, c.scale)
    return p_dim * (2.0 - p_dim)


@dataclass
class SeTrajectory:
    """SE recursion output.  ``sigma2[t-1]`` is the variance entering iteration t."""

    sigma2: list = field(default_factory=list)
    tau_star: list = field(default_factory=list)
    converged: bool = False
    fixed_point: float | None = None
    constellation: Constellation | None = None

    @property
    def final(self):
        return self.sigma2[-1]

    @property
    def ser_pred(self):
        return [float(ser_predict(s, self.constellation)) for s in self.sigma2]


def _unpack(config):
    den = getattr(config, "denoiser", config)
    if not isinstance(den, Denoiser):
        raise TypeError("expected a DetectorConfig or Denoiser")
    policy = getattr(config, "tuning", None) or default_policy(den.family)
    return den, policy


def _converged(prev, new):
    return abs(new - prev) < 1e-12 * (1.0 + prev)


def se_trajectory(N0, beta, config, t_max=None):
    """Iterate ``sigma2 <- N0 + beta psi_mm(sigma2, tau)`` from ``N0 + beta Var[S0]``.

    ``config`` is a :class:`~mlama.amp.DetectorConfig` (or a bare
    :class:`Denoiser`, which then uses its family's default policy).
    """
    if N0 < 0 or beta <= 0:
        raise AnalysisError("need N0 >= 0 and beta > 0")
    den, policy = _unpack(config)
    if t_max is None:
        t_max = getattr(config, "t_max", 10)
    c = den.constellation
    s2 = N0 + beta * c.var
    traj = SeTrajectory(sigma2=[s2], constellation=c)
    for _ in range(int(t_max)):
        tau = float(tune_tau(s2, den, policy))
        new = N0 + beta * psi_mm(s2, tau, den)
        traj.tau_star.append(tau)
        traj.sigma2.append(new)
        traj.converged = _converged(s2, new)
        s2 = new
    if traj.converged:
        traj.fixed_point = s2
    return traj


def fixed_point(N0, beta, config, max_iter=10_000):
    """Fixed point reached by the SE recursion started at ``N0 + beta Var[S0]``.

    Starting from the largest natural variance, the recursion settles on the
    largest fixed point when several exist.
    """
    den, policy = _unpack(config)
    s2 = N0 + beta * den.constellation.var
    for _ in range(max_iter):
        tau = float(tune_tau(s2, den, policy))
        new = N0 + beta * psi_mm(s2, tau, den)
        if _converged(s2, new):
            return new
        s2 = new
    raise AnalysisError(f"SE did not converge in {max_iter} iterations (last sigma2={s2:.6g})")


def _psi_policy(sigma2, den, policy):
    tau = float(tune_tau(sigma2, den, policy))
    return psi_mm(sigma2, tau, den)


def mrt(denoiser, tuning=None, lo=1e-8, hi=1e3, points_per_decade=20):
    """Minimum recovery threshold ``1 / sup dpsi/dsigma2``.

    The slope is a centred finite difference with ``h = 1e-4 sigma2`` on a
    logarithmic grid; ``tau`` is re-tuned at every evaluation (for fixed
    policies, the fixed policy's MSE is differentiated instead).
    """
    policy = tuning or default_policy(denoiser.family)
    n = int(round(np.log10(hi / lo) * points_per_decade)) + 1
    grid = np.logspace(np.log10(lo), np.log10(hi), n)
    slopes = []
    for s2 in grid:
        h = 1e-4 * s2
        up = _psi_policy(s2 + h, denoiser, policy)
        dn = _psi_policy(s2 - h, denoiser, policy)
        slopes.append((up - dn) / (2 * h))
    return float(1.0 / max(slopes))


def write_trajectory_csv(traj, path):
    """Write ``t, sigma2, tau_star, ser_pred`` rows (t starts at 1)."""
    ser = traj.ser_pred
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sigma2", "tau_star", "ser_pred"])
        for t, s2 in enumerate(traj.sigma2, start=1):
            tau = traj.tau_star[t - 1] if t - 1 < len(traj.tau_star) else float("nan")
            w.writerow([t, f"{s2:.17g}", f"{tau:.17g}", f"{ser[t - 1]:.17g}"])
