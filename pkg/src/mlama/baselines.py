"""Reference detectors and the scalar box-relaxation oracle.

Linear detectors (L-MMSE, ZF, MF), a projected-gradient solver for the
box-relaxed least-squares detector, and minimisation of the scalar objective
whose minimiser predicts box-relaxation performance for M-PAM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import AnalysisError, ConfigurationError, DetectorError
from .special import Q

__all__ = [
    "BoxSolverConfig",
    "box_detect",
    "fm_derivative",
    "fm_minimize",
    "fm_objective",
    "lmmse_detect",
    "mf_detect",
    "zf_detect",
]

_SQRT2PI = np.sqrt(2.0 * np.pi)


def _hermitian(H):
    return np.conj(np.swapaxes(H, -1, -2))


def _matvec(A, x):
    return (A @ x[..., None])[..., 0]


def _solve(A, b):
    try:
        return np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise DetectorError(f"singular system: {exc}") from exc


def lmmse_detect(y, H, N0, Es, unbiased=False):
    """Linear MMSE estimate ``(H^H H + (N0/Es) I)^{-1} H^H y``.

    With ``unbiased=True`` each entry is divided by its gain
    ``[W H]_{ll}`` so that the output is ``s0 + noise`` on average; this is
    the form whose slicing matches the decoupled-channel analysis.
    """
    if not N0 > 0:
        raise ConfigurationError("lmmse_detect needs N0 > 0")
    H = np.asarray(H)
    Hh = _hermitian(H)
    MT = H.shape[-1]
    G = Hh @ H + (N0 / Es) * np.eye(MT)
    est = _solve(G, _matvec(Hh, np.asarray(y)))
    if not np.all(np.isfinite(est)):
        raise DetectorError("non-finite L-MMSE estimate")
    if unbiased:
        gain = np.real(np.diagonal(np.linalg.solve(G, Hh @ H), axis1=-2, axis2=-1))
        est = est / gain
    return est


def zf_detect(y, H, rcond=1e-12):
    """Zero-forcing estimate ``(H^H H)^{-1} H^H y``; requires full column rank."""
    H = np.asarray(H)
    MR, MT = H.shape[-2:]
    if MT > MR:
        raise DetectorError(f"zero forcing needs MT <= MR, got {MT} > {MR}")
    sv = np.linalg.svd(H, compute_uv=False)
    if np.any(sv[..., -1] <= rcond * sv[..., 0]):
        raise DetectorError("channel matrix is rank deficient")
    Hh = _hermitian(H)
    return _solve(Hh @ H, _matvec(Hh, np.asarray(y)))


def mf_detect(y, H):
    """Matched filter ``H^H y``."""
    return _matvec(_hermitian(np.asarray(H)), np.asarray(y))


@dataclass(frozen=True)
class BoxSolverConfig:
    """Projected-gradient settings for :func:`box_detect`.

    The step is ``1/L`` with ``L`` a power-iteration estimate of the largest
    eigenvalue of ``H^H H``, inflated by ``safety`` so an under-estimate
    cannot break monotone descent.
    """

    max_iters: int = 5000
    tol: float = 1e-8
    power_iters: int = 200
    safety: float = 1.01

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be > 0")


def _largest_eigenvalue(G, iters):
    v = np.ones(G.shape[:-1], dtype=G.dtype)
    lam = np.zeros(G.shape[:-2])
    for _ in range(iters):
        w = _matvec(G, v)
        nrm = np.linalg.norm(w, axis=-1)
        new = nrm / np.linalg.norm(v, axis=-1)
        v = w / nrm[..., None]
        if np.all(np.abs(new - lam) <= 1e-10 * new):
            lam = new
            break
        lam = new
    return lam


def _project(x, alpha):
    if np.iscomplexobj(x):
        return np.clip(x.real, -alpha, alpha) + 1j * np.clip(x.imag, -alpha, alpha)
    return np.clip(x, -alpha, alpha)


def box_detect(y, H, alpha, cfg=None, on_failure="raise", return_history=False):
    """Solve ``min ||y - H s||^2`` subject to ``|Re s_l|, |Im s_l| <= alpha``.

    Projected gradient descent on ``0.5 ||y - H s||^2`` from ``s = 0`` until
    the projected-gradient norm drops below ``cfg.tol``.

    Parameters
    ----------
    on_failure : {"raise", "flag"}
        With ``flag`` the unconverged iterate is returned together with a
        boolean mask instead of raising.
    return_history : bool
        Also return the objective value after every iteration.

    Returns
    -------
    s : ndarray
    failed : ndarray of bool (only with ``on_failure="flag"``)
    history : list of ndarray (only with ``return_history=True``)
    """
    if not alpha > 0:
        raise ConfigurationError("alpha must be > 0")
    cfg = cfg or BoxSolverConfig()
    y = np.asarray(y)
    H = np.asarray(H)
    Hh = _hermitian(H)
    G = Hh @ H
    b = _matvec(Hh, y)
    step = 1.0 / (cfg.safety * _largest_eigenvalue(G, cfg.power_iters))[..., None]
    dtype = complex if (np.iscomplexobj(G) or np.iscomplexobj(b)) else float
    s = np.zeros(np.broadcast_shapes(b.shape), dtype=dtype)
    done = np.zeros(s.shape[:-1], dtype=bool)
    history = []
    for _ in range(cfg.max_iters):
        grad = _matvec(G, s) - b
        nxt = _project(s - step * grad, alpha)
        pg = np.linalg.norm(s - nxt, axis=-1) / step[..., 0]
        s = np.where(done[..., None], s, nxt)
        if return_history:
            history.append(0.5 * np.sum(np.abs(y - _matvec(H, s)) ** 2, axis=-1))
        done |= pg < cfg.tol
        if np.all(done):
            break
    failed = ~done
    if np.any(failed) and on_failure == "raise":
        raise DetectorError(f"BOX solver did not converge in {cfg.max_iters} iterations", state=s)
    out = (s, failed) if on_failure == "flag" else (s,)
    if return_history:
        out = out + (history,)
    return out[0] if len(out) == 1 else out


# -- scalar box-relaxation oracle ---------------------------------------------


def _fm_terms(M):
    return np.arange(2, 2 * (M - 1) + 1, 2, dtype=float)


def fm_objective(sigma, M, beta, N0):
    """Scalar objective whose minimiser gives the box-relaxation noise level.

    ``N0`` enters through ``N0 / (2 beta sigma)`` (SNR defined as
    ``beta Es / N0``).
    """
    k = _fm_terms(M)
    S = (sigma + k**2 / sigma) * Q(k / sigma) - k / _SQRT2PI * np.exp(-(k**2) / (2 * sigma**2))
    return 0.5 * sigma * (1.0 / beta - (M - 1) / M) + N0 / (2 * beta * sigma) + np.sum(S) / M


def fm_derivative(sigma, M, beta, N0):
    """Analytic ``d fm_objective / d sigma``."""
    k = _fm_terms(M)
    terms = (1 - k**2 / sigma**2) * Q(k / sigma) + k / (_SQRT2PI * sigma) * np.exp(-(k**2) / (2 * sigma**2))
    return 0.5 * (1.0 / beta - (M - 1) / M) - N0 / (2 * beta * sigma**2) + np.sum(terms) / M


def fm_minimize(M, beta, N0, lo=1e-6, hi=1e2, tol=1e-10):
    """Minimiser ``sigma*`` of :func:`fm_objective` (real M-PAM system).

    Golden-section search brackets the minimiser; the result is then
    polished by root-finding on the analytic derivative, because comparing
    objective values cannot resolve the minimiser below ~1e-8 relative.
    """
    if not beta < 1.0 / (1.0 - 1.0 / M):
        raise AnalysisError(f"need beta < (1 - 1/M)^-1 = {1.0 / (1.0 - 1.0 / M):g}, got {beta:g}")
    f = lambda s: fm_objective(s, M, beta, N0)  # noqa: E731
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, a):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    df = lambda s: fm_derivative(s, M, beta, N0)  # noqa: E731
    lo_b, hi_b = max(lo, 0.9 * x), min(hi, 1.1 * x)
    if df(lo_b) < 0 < df(hi_b):
        x = brentq(df, lo_b, hi_b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(x)
