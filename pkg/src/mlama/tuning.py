"""Tuning policies for the denoiser variance parameter ``tau``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DetectorError

__all__ = ["POLICIES", "TuningPolicy", "default_policy", "parse_policy", "search_tau", "tune_tau"]

POLICIES = ("optimal", "fixed", "match-sigma", "limit-zero", "limit-infinity")

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TuningPolicy:
    """How ``tau`` is chosen from the decoupled-noise estimate.

    ``optimal`` minimises the mismatched MSE; ``fixed`` uses ``value``;
    ``match-sigma`` sets ``tau = sigma^2``; the two limits use 0 and inf.
    """

    kind: str = "optimal"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ConfigurationError(f"unknown tuning policy {self.kind!r}; expected one of {POLICIES}")
        if self.kind == "fixed" and (self.value is None or not self.value >= 0):
            raise ConfigurationError("fixed tuning needs a value >= 0")

    def __str__(self):
        return f"fixed={self.value:g}" if self.kind == "fixed" else self.kind


def parse_policy(text):
    """Parse ``"optimal"``, ``"fixed=0.3"``, ``"match-sigma"``, ..."""
    text = text.strip().lower()
    if text.startswith("fixed"):
        _, _, val = text.partition("=")
        try:
            return TuningPolicy("fixed", float(val))
        except ValueError:
            raise ConfigurationError(f"cannot parse tuning policy {text!r}") from None
    return TuningPolicy(text)


def default_policy(family):
    """Policy used when none is configured.

    Gray denoisers default to ``tau = sigma^2``; the clip family has no
    tuning parameter.
    """
    if family.startswith("gray"):
        return TuningPolicy("match-sigma")
    if family == "clip":
        return TuningPolicy("limit-zero")
    return TuningPolicy("optimal")


def search_tau(sigma2, denoiser, n_grid=32, rtol=1e-6):
    """Minimise ``psi_mm(sigma2, tau)`` over tau numerically.

    A 32-point logarithmic scan on ``[1e-4 sigma2, 1e2 (sigma2 + Es)]``
    brackets the minimiser, then golden-section search in ``log tau`` refines
    it to relative tolerance ``rtol``.  ``tau = 0`` is also considered when
    the family admits it (the clipping limit of the hypercube prior).
    """
    from .se import psi_mm

    sigma2 = float(sigma2)
    if sigma2 <= 0:
        return 0.0 if denoiser.family in ("hypercube", "gaussian") else 1e-12

    def psi(t):
        val = psi_mm(sigma2, t, denoiser)
        if not np.isfinite(val):
            raise DetectorError(f"non-finite MSE at sigma2={sigma2:g}, tau={t:g}")
        return val

    grid = np.logspace(np.log10(1e-4 * sigma2), np.log10(1e2 * (sigma2 + denoiser.Es)), n_grid)
    vals = np.array([psi(t) for t in grid])
    i = int(np.argmin(vals))
    a = np.log(grid[max(i - 1, 0)])
    b = np.log(grid[min(i + 1, n_grid - 1)])
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = psi(np.exp(c)), psi(np.exp(d))
    while b - a > rtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = psi(np.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = psi(np.exp(d))
    tau, best = (np.exp(c), fc) if fc < fd else (np.exp(d), fd)
    if vals[i] < best:
        tau, best = grid[i], vals[i]
    if denoiser.family == "hypercube" and psi(0.0) < best:
        tau = 0.0
    return float(tau)


def tune_tau(sigma2, denoiser, policy=None):
    """``tau`` for decoupled-noise estimate(s) ``sigma2`` under ``policy``.

    Gaussian and exact-prior families have the closed-form optimum
    ``tau = sigma2`` (no search).  Accepts scalars or arrays.
    """
    policy = policy or default_policy(denoiser.family)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 < 0):
        raise DetectorError("negative noise-variance estimate")
    kind = policy.kind
    if kind == "fixed":
        return np.full_like(sigma2, policy.value)
    if kind == "limit-zero":
        return np.zeros_like(sigma2)
    if kind == "limit-infinity":
        return np.full_like(sigma2, np.inf)
    if kind == "match-sigma" or denoiser.family in ("gaussian", "exact"):
        return sigma2.copy()
    if denoiser.family == "clip":
        return np.zeros_like(sigma2)
    flat = [search_tau(s, denoiser) for s in sigma2.ravel()]
    return np.asarray(flat, dtype=float).reshape(sigma2.shape)
