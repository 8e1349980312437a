"""Scikit-learn style wrappers around the detectors.

``fit(H)`` stores a channel matrix; ``transform(Y)`` maps received vectors
(rows of ``Y``, shape ``(n_samples, MR)``) to soft symbol estimates and
``predict(Y)`` to hard decisions.  Complex data is accepted, which
``sklearn.utils.check_array`` does not allow, hence the local validators.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .amp import DetectorConfig, detect
from .baselines import BoxSolverConfig, box_detect, lmmse_detect, mf_detect, zf_detect
from .constellation import Constellation, from_key
from .denoisers import Denoiser
from .exceptions import ConfigurationError
from .tuning import TuningPolicy, parse_policy

__all__ = ["AmpDetector", "BoxDetector", "LinearDetector", "check_channel", "check_received"]


def _as_numeric(X, name):
    X = np.asarray(X)
    if X.dtype.kind not in "biufc":
        raise ValueError(f"{name} must be numeric, got dtype {X.dtype}")
    X = X.astype(complex if X.dtype.kind == "c" else float)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or inf")
    return X


def check_channel(H):
    """Validate a 2-D, finite, real or complex channel matrix."""
    H = _as_numeric(H, "H")
    if H.ndim != 2 or min(H.shape) < 1:
        raise ValueError(f"H must be a non-empty 2-D array, got shape {H.shape}")
    return H


def check_received(Y, n_rx):
    """Validate received vectors; a single 1-D vector is promoted to one row."""
    Y = _as_numeric(Y, "Y")
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2 or Y.shape[1] != n_rx:
        raise ValueError(f"Y must have shape (n_samples, {n_rx}), got {Y.shape}")
    return Y


def _constellation(c):
    return c if isinstance(c, Constellation) else from_key(c)


class _DetectorBase(TransformerMixin, BaseEstimator):
    def fit(self, H, y=None):
        """Store the channel matrix ``H`` of shape ``(MR, MT)``."""
        H = check_channel(H)
        self.constellation_ = _constellation(self.constellation)
        self.H_ = H
        self.n_features_in_ = H.shape[0]
        self.n_streams_ = H.shape[1]
        return self

    def _soft(self, Y):
        raise NotImplementedError

    def transform(self, Y):
        """Soft estimates, shape ``(n_samples, MT)``."""
        check_is_fitted(self, "H_")
        return self._soft(check_received(Y, self.n_features_in_))

    def predict(self, Y):
        """Hard decisions on the alphabet, shape ``(n_samples, MT)``."""
        est = self.transform(Y)
        c = self.constellation_
        return c.slice(est if c.is_complex else np.real(est))


class AmpDetector(_DetectorBase):
    """mLAMA detector.

    Parameters
    ----------
    constellation : str or Constellation
    denoiser : str
        Denoiser family key (``exact``, ``gaussian``, ``hypercube``, ``clip``,
        ``gray``, ``gray-maxlog``).
    tuning : str, TuningPolicy or None
        ``None`` picks the family default.
    t_max : int
    """

    def __init__(self, constellation="qpsk", denoiser="exact", tuning=None, t_max=10):
        self.constellation = constellation
        self.denoiser = denoiser
        self.tuning = tuning
        self.t_max = t_max

    def fit(self, H, y=None):
        super().fit(H, y)
        tuning = parse_policy(self.tuning) if isinstance(self.tuning, str) else self.tuning
        if tuning is not None and not isinstance(tuning, TuningPolicy):
            raise ConfigurationError(f"bad tuning {self.tuning!r}")
        self.config_ = DetectorConfig(Denoiser(self.denoiser, self.constellation_), tuning, int(self.t_max))
        return self

    def _soft(self, Y):
        self.result_ = detect(Y, self.H_, self.config_, on_divergence="flag")
        return self.result_.soft

    def predict(self, Y):
        self.transform(Y)
        return self.result_.hard


class LinearDetector(_DetectorBase):
    """Linear equaliser: ``kind`` is ``lmmse``, ``zf`` or ``mf``.

    ``noise_var`` is required for L-MMSE; ``unbiased`` rescales the L-MMSE
    output so that slicing is unbiased.
    """

    def __init__(self, kind="lmmse", constellation="qpsk", noise_var=None, unbiased=True):
        self.kind = kind
        self.constellation = constellation
        self.noise_var = noise_var
        self.unbiased = unbiased

    def fit(self, H, y=None):
        if self.kind not in ("lmmse", "zf", "mf"):
            raise ConfigurationError(f"unknown linear detector {self.kind!r}")
        if self.kind == "lmmse" and not (self.noise_var is not None and self.noise_var > 0):
            raise ConfigurationError("lmmse needs noise_var > 0")
        return super().fit(H, y)

    def _soft(self, Y):
        if self.kind == "lmmse":
            return lmmse_detect(Y, self.H_, self.noise_var, self.constellation_.Es, unbiased=self.unbiased)
        if self.kind == "zf":
            return zf_detect(Y, self.H_)
        return mf_detect(Y, self.H_)


class BoxDetector(_DetectorBase):
    """Box-relaxed least squares with ``alpha`` from the constellation."""

    def __init__(self, constellation="qpsk", max_iters=5000, tol=1e-8):
        self.constellation = constellation
        self.max_iters = max_iters
        self.tol = tol

    def _soft(self, Y):
        cfg = BoxSolverConfig(max_iters=int(self.max_iters), tol=float(self.tol))
        est, self.failed_ = box_detect(Y, self.H_, self.constellation_.alpha, cfg, on_failure="flag")
        return est
