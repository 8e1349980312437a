"""Mismatched complex Bayesian AMP detector (mLAMA and its variants).

Each iteration

1. estimates the decoupled noise variance ``sigma2 = ||r||^2 / MR``,
2. picks ``tau`` from ``sigma2`` with the configured tuning policy,
3. denoises ``s <- F(s + H^H r, tau)``,
4. updates ``r <- y - H s + beta r <F'>`` (Onsager correction).

All arrays may carry leading batch dimensions: ``y`` is ``(..., MR)`` and
``H`` is ``(MR, MT)`` or ``(..., MR, MT)``.  Batched trials are independent;
a diverging trial is frozen at its last finite iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoisers import Denoiser
from .exceptions import ConfigurationError, DetectorError
from .tuning import TuningPolicy, default_policy, tune_tau

__all__ = ["AmpResult", "AmpState", "DetectorConfig", "detect", "onsager_average"]

_TAU_FLOOR = 1e-300
_DIVERGENCE_FACTOR = 1e3


@dataclass(frozen=True)
class DetectorConfig:
    """Denoiser family, tuning policy and iteration budget of one detector."""

    denoiser: Denoiser
    tuning: TuningPolicy | None = None
    t_max: int = 10
    record_trajectory: bool = True
    early_stop: bool = False

    def __post_init__(self):
        if int(self.t_max) < 1:
            raise ConfigurationError("t_max must be >= 1")
        if self.tuning is None:
            object.__setattr__(self, "tuning", default_policy(self.denoiser.family))

    @property
    def label(self):
        return f"{self.denoiser.family}@{self.tuning}"


@dataclass
class AmpState:
    """Iterate ``(s^t, r^t)`` together with ``sigma2_est`` and the ``tau`` used."""

    s: np.ndarray
    r: np.ndarray
    sigma2_est: np.ndarray
    tau: np.ndarray | None
    iter: int


@dataclass
class AmpResult:
    """Output of :func:`detect`.

    Attributes
    ----------
    soft : ndarray
        Final denoised estimate ``s^{t_max+1}``.
    decoupled : ndarray
        Final decoupled observation ``s + H^H r``, which behaves like
        ``s0 + CN(0, sigma2)`` in the large-system limit.
    hard : ndarray
        ``decoupled`` sliced onto the alphabet.
    trajectory : ndarray
        ``sigma2_est`` for t = 1 .. t_max + 1 (leading axis), if recorded.
    taus : ndarray
        ``tau`` used at t = 1 .. t_max.
    diverged : ndarray of bool
        Per-trial divergence flags.
    """

    soft: np.ndarray
    decoupled: np.ndarray
    hard: np.ndarray
    trajectory: np.ndarray | None
    taus: np.ndarray | None
    diverged: np.ndarray
    state: AmpState


def _matvec(A, x):
    return (A @ x[..., None])[..., 0]


def onsager_average(deriv):
    """``<F'>`` averaged over the transmit dimension."""
    return np.mean(deriv, axis=-1)


def detect(y, H, config, on_divergence="raise"):
    """Run ``config.t_max`` AMP iterations.

    Parameters
    ----------
    y : array_like, shape (..., MR)
    H : array_like, shape (MR, MT) or (..., MR, MT)
    config : DetectorConfig
    on_divergence : {"raise", "flag"}
        ``raise`` throws :class:`DetectorError` carrying the last finite
        state; ``flag`` freezes diverged trials and reports them in
        ``AmpResult.diverged``.
    """
    den = config.denoiser
    c = den.constellation
    y = np.asarray(y)
    H = np.asarray(H)
    MR, MT = H.shape[-2:]
    if y.shape[-1] != MR:
        raise ConfigurationError(f"y has length {y.shape[-1]} but H has {MR} rows")
    beta = MT / MR
    dtype = complex if (c.is_complex or np.iscomplexobj(H) or np.iscomplexobj(y)) else float
    batch = np.broadcast_shapes(y.shape[:-1], H.shape[:-2])
    Hh = np.conj(np.swapaxes(H, -1, -2))
    needs_positive = den.family in ("exact", "gray", "gray-maxlog")
    limit = _DIVERGENCE_FACTOR * den.alpha

    s = np.full(batch + (MT,), c.mean, dtype=dtype)
    r = np.broadcast_to(y - _matvec(H, s), batch + (MR,)).astype(dtype)
    sigma2 = np.mean(np.abs(r) ** 2, axis=-1)
    active = np.ones(batch, dtype=bool)
    diverged = np.zeros(batch, dtype=bool)
    traj = [sigma2]
    taus = []
    tau = None
    for t in range(1, int(config.t_max) + 1):
        tau = tune_tau(sigma2, den, config.tuning)
        if needs_positive:
            tau = np.maximum(tau, _TAU_FLOOR)
        z = s + _matvec(Hh, r)
        s_new, deriv = den(z, tau[..., None])
        r_new = y - _matvec(H, s_new) + beta * onsager_average(deriv)[..., None] * r
        bad = ~(np.all(np.isfinite(s_new), axis=-1) & np.all(np.isfinite(r_new), axis=-1))
        bad |= np.any(np.abs(s_new) > limit, axis=-1)
        if np.any(bad & active):
            if on_divergence == "raise":
                raise DetectorError(
                    f"AMP diverged at iteration {t}",
                    state=AmpState(s=s, r=r, sigma2_est=sigma2, tau=tau, iter=t),
                )
            diverged |= bad & active
        ok = active & ~bad
        s = np.where(ok[..., None], s_new, s)
        r = np.where(ok[..., None], r_new, r)
        new_sigma2 = np.where(ok, np.mean(np.abs(r) ** 2, axis=-1), sigma2)
        if config.early_stop:
            active &= ~(np.abs(new_sigma2 - sigma2) < 1e-6)
        active &= ~bad
        sigma2 = new_sigma2
        traj.append(sigma2)
        taus.append(tau)
        if not np.any(active):
            break
    z = s + _matvec(Hh, r)
    state = AmpState(s=s, r=r, sigma2_est=sigma2, tau=tau, iter=t)
    return AmpResult(
        soft=s,
        decoupled=z,
        hard=c.slice(z if c.is_complex else np.real(z)),
        trajectory=np.array(traj) if config.record_trajectory else None,
        taus=np.array(taus) if config.record_trajectory else None,
        diverged=diverged,
        state=state,
    )
