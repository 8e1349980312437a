"""Scalar posterior-mean denoisers ``F(r, tau)`` and their derivatives.

Every function returns ``(mean, deriv)``.  ``tau`` is the variance of the
Gaussian observation model assumed by the denoiser: for complex alphabets the
model is ``CN(s, tau)`` (variance ``tau/2`` per real dimension); for real PAM
alphabets it is ``N(s, tau)``.  ``deriv`` is the scalar used in the Onsager
term: the average of the two per-dimension partial derivatives
``(dRe F/dRe r + dIm F/dIm r) / 2`` for complex alphabets, and the ordinary
derivative for real ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .constellation import Constellation
from .exceptions import ConfigurationError, DomainError

__all__ = [
    "FAMILIES",
    "Denoiser",
    "f_clip",
    "f_exact",
    "f_gaussian",
    "f_gray",
    "f_hypercube",
    "gray_llrs",
    "make_denoiser",
]

FAMILIES = ("exact", "gaussian", "hypercube", "clip", "gray", "gray-maxlog")

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)
_LOG2 = np.log(2.0)


def _require_positive(tau, name="tau"):
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0)):
        raise DomainError(f"{name} must be > 0")
    return tau


def _split(r, per_dim, real):
    """Apply a per-dimension map to Re/Im parts and average the derivatives."""
    if real:
        return per_dim(np.real(r))
    mr, dr = per_dim(np.real(r))
    mi, di = per_dim(np.imag(r))
    return mr + 1j * mi, 0.5 * (dr + di)


# -- exact prior --------------------------------------------------------------


def f_exact(r, tau, c):
    """Posterior mean under the true (uniform, discrete) prior.

    Softmax over ``-|r - a|^2 / tau`` (complex) or ``-(r - a)^2 / (2 tau)``
    (real), evaluated with max subtraction so that small ``tau`` does not
    underflow.  The derivative equals the posterior variance divided by
    ``tau``.
    """
    tau = _require_positive(tau)
    r = np.asarray(r)
    if not c.is_complex:
        r = np.real(r)
    pts = c.points
    d2 = np.abs(r[..., None] - pts) ** 2
    scale = tau if c.is_complex else 2.0 * tau
    logits = np.log(c.prior_probs) - d2 / np.asarray(scale)[..., None]
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    mean = w @ pts
    var = np.sum(w * np.abs(pts - mean[..., None]) ** 2, axis=-1)
    return mean, var / tau


# -- Gaussian prior -----------------------------------------------------------


def f_gaussian(r, tau, Es):
    """Linear shrinkage ``Es / (Es + tau) * r``; ``tau`` may be 0 or inf."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(np.isnan(tau)):
        raise DomainError("tau must be >= 0")
    if Es <= 0:
        raise DomainError("Es must be > 0")
    gain = Es / (Es + tau)
    r = np.asarray(r)
    return gain * r, np.broadcast_to(gain, np.shape(gain * r)).astype(float)


# -- uniform hypercube prior --------------------------------------------------


def _nu(x, v, alpha):
    """Return ``(nu_minus, nu_plus)`` for per-dimension variance ``v``.

    Uses odd/even symmetry to work with ``|x|`` and, when both CDF arguments
    are positive, cancels the common factor ``exp(-u2^2/2)`` using the scaled
    complementary error function so nothing underflows.
    """
    sgn = np.where(x < 0, -1.0, 1.0)
    ax = np.abs(x)
    sv = np.sqrt(v)
    u1 = (ax + alpha) / sv
    u2 = (ax - alpha) / sv
    tail = u2 > 0
    # Tail branch: ratios after dividing numerator and denominator by exp(-u2^2/2).
    u2t = np.where(tail, u2, 1.0)
    g = np.exp(-2.0 * alpha * ax / v)
    den_t = 0.5 * (sp.erfcx(u2t / _SQRT2) - sp.erfcx(u1 / _SQRT2) * g)
    num_m_t = (g - 1.0) / _SQRT2PI
    num_p_t = (g + 1.0) / _SQRT2PI
    # Central branch: direct densities and a well-conditioned CDF difference.
    p1 = np.exp(-0.5 * u1 * u1) / _SQRT2PI
    p2 = np.exp(-0.5 * u2 * u2) / _SQRT2PI
    den_c = 0.5 * (sp.erfc(u2 / _SQRT2) - sp.erfc(u1 / _SQRT2))
    num_m = np.where(tail, num_m_t, p1 - p2)
    num_p = np.where(tail, num_p_t, p1 + p2)
    den = np.where(tail, den_t, den_c) * sv
    return sgn * num_m / den, num_p / den


_TAIL_U = 25.0
_TAIL_PANELS = np.array([0.0, 2.5, 5.0, 10.0, 20.0, 40.0])
_GL16 = np.polynomial.legendre.leggauss(16)


def _tail_moments(u, width):
    """Mean and variance of ``t - u`` for a standard normal truncated to ``[u, u + width]``.

    With ``eta = u (t - u)`` the density is ``exp(-eta - eta^2 / (2 u^2))``
    on ``[0, u * width]``, which panelled Gauss-Legendre integrates without
    the cancellation that the Mills-ratio formulas suffer for large ``u``.
    """
    top = np.minimum(u * width, _TAIL_PANELS[-1])[..., None]
    lo = np.minimum(_TAIL_PANELS[:-1], top)
    hi = np.minimum(_TAIL_PANELS[1:], top)
    half = 0.5 * (hi - lo)
    eta = (0.5 * (hi + lo))[..., None] + half[..., None] * _GL16[0]
    w = half[..., None] * _GL16[1] * np.exp(-eta - eta**2 / (2.0 * u[..., None, None] ** 2))
    m0 = w.sum(axis=(-2, -1))
    m1 = (w * eta).sum(axis=(-2, -1)) / m0
    m2 = (w * eta * eta).sum(axis=(-2, -1)) / m0
    return m1 / u, (m2 - m1 * m1) / (u * u)


def _hypercube_dim(x, v, alpha):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x, v = np.broadcast_arrays(x, v)
    finite = (v > 0) & np.isfinite(v)
    vs = np.where(finite, v, 1.0)
    nm, npl = _nu(x, vs, alpha)
    mean = x + vs * nm
    deriv = 1.0 - (x * nm + alpha * npl) - vs * nm * nm
    # Far outside the box the closed-form derivative cancels catastrophically;
    # there the posterior is a one-sided truncated normal handled directly.
    sv = np.sqrt(vs)
    u = (np.abs(x) - alpha) / sv
    far = finite & (u > _TAIL_U)
    if np.any(far):
        ed, vd = _tail_moments(u[far], 2.0 * alpha / sv[far])
        mean = np.array(mean, dtype=float)
        deriv = np.array(deriv, dtype=float)
        mean[far] = np.sign(x[far]) * (alpha - sv[far] * ed)
        deriv[far] = vd
    cm, cd = _clip_dim(x, alpha)
    # v == 0 is the clipping limit; v == inf leaves only the prior mean 0.
    mean = np.where(finite, mean, np.where(v == 0, cm, 0.0))
    deriv = np.where(finite, deriv, np.where(v == 0, cd, 0.0))
    return mean, deriv


def f_hypercube(r, tau, alpha, real=False):
    """Posterior mean under a uniform prior on ``[-alpha, alpha]`` per dimension."""
    tau = _require_positive(tau)
    if alpha <= 0:
        raise DomainError("alpha must be > 0")
    v = tau if real else tau / 2.0
    return _split(r, lambda x: _hypercube_dim(x, v, alpha), real)


# -- clipping (tau -> 0 hypercube limit) --------------------------------------


def _clip_dim(x, alpha):
    x = np.asarray(x, dtype=float)
    return np.clip(x, -alpha, alpha), (np.abs(x) < alpha).astype(float)


def f_clip(r, alpha, real=False):
    """Per-dimension clamp to ``[-alpha, alpha]``; derivative uses a strict indicator."""
    if alpha <= 0:
        raise DomainError("alpha must be > 0")
    return _split(r, lambda x: _clip_dim(x, alpha), real)


# -- Gray-coded bit-wise approximation ----------------------------------------


def _logcosh(u):
    return np.logaddexp(u, -u) - _LOG2


def _half_llrs(xs, vs, mode):
    """Half-LLRs and their slopes for 4-PAM on the unit grid.

    ``rho = 1/(2 vs)`` is the inverse of the complex-model variance.
    """
    rho = 1.0 / (2.0 * vs)
    if mode == "exact":
        L0 = 4.0 * rho + 0.5 * (_logcosh(2 * rho * xs) - _logcosh(6 * rho * xs))
        L1 = 4.0 * rho * xs + 0.5 * (_logcosh(2 * rho * (xs - 2)) - _logcosh(2 * rho * (xs + 2)))
        dL0 = rho * np.tanh(2 * rho * xs) - 3 * rho * np.tanh(6 * rho * xs)
        dL1 = 4 * rho + rho * np.tanh(2 * rho * (xs - 2)) - rho * np.tanh(2 * rho * (xs + 2))
    else:
        L0 = 2.0 * rho * (2.0 - np.abs(xs))
        L1 = rho * (4.0 * xs + np.abs(xs - 2) - np.abs(xs + 2))
        dL0 = -2.0 * rho * np.sign(xs)
        dL1 = rho * (4.0 + np.sign(xs - 2) - np.sign(xs + 2))
    return L0, L1, dL0, dL1


def gray_llrs(x, v, mode="exact"):
    """Bit LLRs ``(Lambda_0, Lambda_1)`` of a unit-grid 4-PAM observation.

    ``x`` is the per-dimension observation and ``v`` its noise variance.
    Bit 1 is the sign bit, bit 0 marks the inner levels.
    """
    L0, L1, _, _ = _half_llrs(np.asarray(x, dtype=float), np.asarray(v, dtype=float), mode)
    return 2.0 * L0, 2.0 * L1


def _gray_dim(x, v, M, scale, mode):
    xs = np.asarray(x, dtype=float) / scale
    vs = np.asarray(v, dtype=float) / scale**2
    if M == 2:
        t = np.tanh(xs / vs)
        return scale * t, (1.0 - t * t) / vs
    L0, L1, dL0, dL1 = _half_llrs(xs, vs, mode)
    t0, t1 = np.tanh(L0), np.tanh(L1)
    mean = (2.0 - t0) * t1
    deriv = (2.0 - t0) * (1.0 - t1 * t1) * dL1 - (1.0 - t0 * t0) * dL0 * t1
    return scale * mean, deriv


def f_gray(r, tau, c, mode="exact"):
    """Gray-coded posterior-mean approximation (bit-wise independent weights).

    Supported for QPSK/BPSK (where it is exact) and 16-QAM/4-PAM.
    ``mode`` selects exact cosh-ratio LLRs or their max-log simplification.
    """
    if c.M not in (2, 4):
        raise ConfigurationError(f"Gray denoiser supports 2 or 4 levels per dimension, got {c.M}")
    if mode not in ("exact", "maxlog"):
        raise ConfigurationError(f"unknown Gray mode {mode!r}")
    tau = _require_positive(tau)
    real = not c.is_complex
    v = tau if real else tau / 2.0
    return _split(r, lambda x: _gray_dim(x, v, c.M, c.scale, mode), real)


# -- family dispatch ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Denoiser:
    """A posterior-mean family bound to the true alphabet.

    Calling the object evaluates ``(mean, deriv)``.  Separable complex
    alphabets are processed per real dimension, which is exact by
    construction for every family.
    """

    family: str
    constellation: Constellation

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown denoiser family {self.family!r}; expected one of {FAMILIES}")
        if self.family.startswith("gray") and self.constellation.M not in (2, 4):
            raise ConfigurationError("Gray denoisers are implemented for QPSK/BPSK and 16-QAM/4-PAM only")

    @property
    def Es(self):
        return self.constellation.Es

    @property
    def alpha(self):
        return self.constellation.alpha

    @property
    def kinked(self):
        """True when ``F`` has points of non-differentiability."""
        return self.family in ("clip", "gray-maxlog")

    @property
    def uses_tau(self):
        return self.family != "clip"

    def per_dimension(self):
        """The same family acting on the real PAM component (separable alphabets)."""
        return Denoiser(self.family, self.constellation.real_component())

    def breakpoints(self):
        """Per-dimension locations of kinks or sharp transitions of ``F``."""
        c = self.constellation
        if self.family == "exact":
            lv = c.levels
            return 0.5 * (lv[1:] + lv[:-1])
        if self.family in ("hypercube", "clip"):
            return np.array([-c.alpha, c.alpha])
        if self.family.startswith("gray"):
            return c.scale * (np.array([0.0]) if c.M == 2 else np.array([-2.0, 0.0, 2.0]))
        return np.array([])

    def _dim(self, x, v):
        c = self.constellation
        fam = self.family
        if fam == "exact":
            return f_exact(x, v, c.real_component())
        if fam == "gaussian":
            return f_gaussian(x, v, c.real_component().Es)
        if fam == "hypercube":
            return _hypercube_dim(x, v, c.alpha)
        if fam == "clip":
            return _clip_dim(x, c.alpha)
        v = np.asarray(v, dtype=float)
        if np.any(~(v > 0)):
            raise DomainError("tau must be > 0 for Gray denoisers")
        mode = "maxlog" if fam == "gray-maxlog" else "exact"
        return _gray_dim(x, v, c.M, c.scale, mode)

    def __call__(self, r, tau):
        c = self.constellation
        tau = np.asarray(tau, dtype=float)
        if self.family == "exact":
            if np.any(~(tau > 0)):
                raise DomainError("tau must be > 0 for the exact-prior denoiser")
            if c.is_complex and not c.is_separable():
                return f_exact(r, tau, c)
        if self.family == "hypercube" and np.any(tau < 0):
            raise DomainError("tau must be >= 0")
        if not c.is_complex:
            return self._dim(np.real(r), tau)
        return _split(r, lambda x: self._dim(x, tau / 2.0), real=False)


def make_denoiser(key, constellation):
    """Denoiser from a config key (``"exact"``, ``"gray-maxlog"``, ...)."""
    return Denoiser(key.lower(), constellation)
