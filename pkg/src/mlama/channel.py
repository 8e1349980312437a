"""System model ``y = H s0 + n`` with i.i.d. Gaussian channels.

Complex alphabets use circularly-symmetric complex Gaussian (CSCG) entries;
real PAM alphabets use the real-valued counterpart of the same model.
Gaussian variates come from numpy's ``Generator.standard_normal`` (ziggurat
method) driven by a Philox counter-based bit generator, so a stream is fully
determined by ``(master_seed, trial_index)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "MimoInstance",
    "draw_channel",
    "draw_instance",
    "draw_symbols",
    "snr_to_n0",
    "transmit",
    "trial_rng",
]


def trial_rng(master_seed, trial_index):
    """Independent generator for one Monte-Carlo trial."""
    seq = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return np.random.Generator(np.random.Philox(seq))


def _gaussian(rng, shape, var, real):
    if real:
        return np.sqrt(var) * rng.standard_normal(shape)
    g = rng.standard_normal(shape + (2,))
    return np.sqrt(var / 2.0) * (g[..., 0] + 1j * g[..., 1])


def draw_channel(MR, MT, rng, real=False):
    """``MR x MT`` matrix with i.i.d. entries of variance ``1/MR``."""
    if MR < 1 or MT < 1:
        raise ConfigurationError(f"channel dimensions must be positive, got {MR}x{MT}")
    return _gaussian(rng, (int(MR), int(MT)), 1.0 / MR, real)


def snr_to_n0(snr_db, beta, Es):
    """Noise variance for ``SNR = beta * Es / N0`` given in dB."""
    return beta * Es / 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def transmit(H, s0, N0, rng):
    """Pass ``s0`` through ``H`` and add white Gaussian noise of variance ``N0``.

    Returns
    -------
    y, n : ndarray
    """
    H = np.asarray(H)
    s0 = np.asarray(s0)
    if H.shape[-1] != s0.shape[-1]:
        raise ConfigurationError(f"H has {H.shape[-1]} columns but s0 has length {s0.shape[-1]}")
    real = not np.iscomplexobj(H) and not np.iscomplexobj(s0)
    n = _gaussian(rng, H.shape[:-1], N0, real)
    y = H @ s0 + n
    return y, n


def draw_symbols(constellation, MT, rng):
    idx = rng.integers(0, constellation.points.size, size=int(MT))
    return constellation.points[idx]


@dataclass(frozen=True, eq=False)
class MimoInstance:
    """One realisation of the system model."""

    H: np.ndarray
    s0: np.ndarray
    n: np.ndarray
    y: np.ndarray
    N0: float

    @property
    def MR(self):
        return self.H.shape[0]

    @property
    def MT(self):
        return self.H.shape[1]

    @property
    def beta(self):
        return self.MT / self.MR


def draw_instance(constellation, MR, MT, N0, rng):
    """Draw symbols, channel and noise (in that order) from ``rng``."""
    s0 = draw_symbols(constellation, MT, rng)
    H = draw_channel(MR, MT, rng, real=not constellation.is_complex)
    y, n = transmit(H, s0, N0, rng)
    return MimoInstance(H=H, s0=s0, n=n, y=y, N0=float(N0))
