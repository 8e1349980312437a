"""Discrete transmit alphabets: PAM/QAM grids, Gray labels and hard slicing.

Points live on the odd-integer grid ``{±1, ±3, ..., ±(M-1)}`` per real
dimension, optionally multiplied by ``scale`` (the half-distance between
neighbouring levels).  PAM alphabets are real-valued and are used in
real-valued systems; QAM alphabets are the Cartesian product of two PAM
level sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "Constellation",
    "CONSTELLATION_KEYS",
    "from_key",
    "gray_code",
    "make_constellation",
    "nearest_point",
    "slice_symbols",
]

_SUPPORTED_M = (2, 4, 8, 16)

CONSTELLATION_KEYS = {
    "bpsk": ("bpsk", 2),
    "qpsk": ("qpsk", 2),
    "4pam": ("pam", 4),
    "16qam": ("qam", 4),
    "64qam": ("qam", 8),
}


def gray_code(nbits):
    """Reflected binary Gray sequence of length ``2**nbits``."""
    i = np.arange(1 << nbits)
    return i ^ (i >> 1)


def _gray_labels(M):
    # Row k holds the bit label (MSB first) of the k-th level, levels ascending.
    nbits = int(np.log2(M))
    codes = gray_code(nbits)
    return ((codes[:, None] >> np.arange(nbits - 1, -1, -1)) & 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Immutable symbol alphabet with uniform prior.

    Attributes
    ----------
    kind : {"pam", "qam"}
        Real M-PAM or complex M^2-QAM.  BPSK is 2-PAM and QPSK is 4-QAM.
    M : int
        Number of levels per real dimension.
    scale : float
        Half-distance between adjacent levels (1 for the raw integer grid).
    name : str
        Human readable key, e.g. ``"16qam"``.
    """

    kind: str
    M: int
    scale: float = 1.0
    name: str = ""
    points: np.ndarray = field(init=False, repr=False)
    prior_probs: np.ndarray = field(init=False, repr=False)
    bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        levels = self.levels
        labels = _gray_labels(self.M)
        if self.kind == "pam":
            points = levels.astype(float)
            bits = labels
        elif self.kind == "qam":
            re, im = np.meshgrid(levels, levels, indexing="ij")
            points = (re + 1j * im).ravel()
            ib, qb = np.meshgrid(np.arange(self.M), np.arange(self.M), indexing="ij")
            bits = np.concatenate([labels[ib.ravel()], labels[qb.ravel()]], axis=1)
        else:
            raise ConfigurationError(f"unknown constellation kind {self.kind!r}")
        probs = np.full(points.shape, 1.0 / points.size)
        for name, value in (("points", points), ("prior_probs", probs), ("bits", bits)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def levels(self):
        """Sorted per-dimension amplitude levels."""
        return self.scale * np.arange(-(self.M - 1), self.M, 2, dtype=float)

    @property
    def is_complex(self):
        return self.kind == "qam"

    @property
    def Es(self):
        """Mean symbol energy ``sum p(a) |a|^2``."""
        return float(np.sum(self.prior_probs * np.abs(self.points) ** 2))

    @property
    def mean(self):
        value = complex(np.sum(self.prior_probs * self.points))
        return value if self.is_complex else value.real

    @property
    def var(self):
        return self.Es - abs(self.mean) ** 2

    @property
    def alpha(self):
        """Half-width of the per-dimension box covering the alphabet."""
        return (self.M - 1) * self.scale

    @property
    def bits_per_symbol(self):
        return self.bits.shape[1]

    @property
    def gray_map(self):
        """Mapping from bit-label string to constellation point."""
        return {"".join(map(str, b)): p for b, p in zip(self.bits, self.points)}

    def is_separable(self):
        """Check separability: equal real/imaginary alphabets and a product prior."""
        re = np.round(self.points.real / self.scale).astype(int)
        im = np.round(np.imag(self.points) / self.scale).astype(int)
        re_set, im_set = np.unique(re), np.unique(im)
        if not np.array_equal(re_set, im_set):
            return False
        p_re = {v: self.prior_probs[re == v].sum() for v in re_set}
        p_im = {v: self.prior_probs[im == v].sum() for v in im_set}
        joint = np.array([p_re[a] * p_im[b] for a, b in zip(re, im)])
        return bool(np.allclose(joint, self.prior_probs, rtol=0, atol=1e-15))

    def real_component(self):
        """Real PAM alphabet carried by each dimension of a separable QAM."""
        if self.kind == "pam":
            return self
        return Constellation("pam", self.M, self.scale, name=f"{self.M}pam")

    def slice(self, z):
        """Hard decision; see :func:`slice_symbols`."""
        return slice_symbols(z, self)


def make_constellation(kind, M=None, normalize=False):
    """Build a constellation.

    Parameters
    ----------
    kind : {"pam", "qam", "bpsk", "qpsk"}
    M : int
        Levels per real dimension (ignored for ``bpsk``/``qpsk``).
    normalize : bool
        Scale the grid to unit symbol energy.  The default keeps the odd
        integer grid, where ``alpha = M - 1``.
    """
    kind = kind.lower()
    if kind in ("bpsk", "qpsk"):
        if M not in (None, 2):
            raise ConfigurationError(f"{kind} has M=2 per dimension, got M={M}")
        base, M = ("pam" if kind == "bpsk" else "qam"), 2
        name = kind
    elif kind in ("pam", "qam"):
        if M not in _SUPPORTED_M:
            raise ConfigurationError(f"M must be one of {_SUPPORTED_M}, got {M!r}")
        base = kind
        name = f"{M}pam" if kind == "pam" else f"{M * M}qam"
    else:
        raise ConfigurationError(f"unsupported constellation kind {kind!r}")
    scale = 1.0
    if normalize:
        scale = 1.0 / np.sqrt(Constellation(base, M).Es)
    return Constellation(base, M, scale, name=name)


def from_key(key, normalize=False):
    """Constellation from a config key such as ``"16qam"``."""
    try:
        kind, M = CONSTELLATION_KEYS[key.lower()]
    except KeyError:
        raise ConfigurationError(
            f"unknown constellation key {key!r}; expected one of {sorted(CONSTELLATION_KEYS)}"
        ) from None
    return make_constellation(kind, M, normalize=normalize)


def _slice_dim(x, M, scale):
    # Count decision thresholds strictly below x; exact midpoints go to the lower level.
    thresholds = scale * np.arange(-(M - 2), M - 1, 2, dtype=float)
    k = np.searchsorted(thresholds, np.asarray(x, dtype=float), side="left")
    return scale * (2.0 * k - (M - 1))


def slice_symbols(z, c):
    """Map soft estimates to the nearest constellation point.

    Ties are broken toward the smaller real part, then the smaller imaginary
    part, so repeated runs give identical decisions.
    """
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise ValueError("slice requires finite input")
    re = _slice_dim(z.real, c.M, c.scale)
    if not c.is_complex:
        return re
    return re + 1j * _slice_dim(np.imag(z), c.M, c.scale)


def nearest_point(z, points):
    """Brute-force nearest neighbour with lexicographic tie-breaking.

    Slow reference used to cross-check :func:`slice_symbols`.
    """
    points = np.asarray(points)
    order = np.lexsort((np.imag(points), points.real))
    ordered = points[order]
    z = np.asarray(z)
    d = np.abs(z[..., None] - ordered) ** 2
    return ordered[np.argmin(d, axis=-1)]
