import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlama.constellation import (
    CONSTELLATION_KEYS,
    from_key,
    gray_code,
    make_constellation,
    nearest_point,
    slice_symbols,
)
from mlama.exceptions import ConfigurationError

finite = st.floats(-20, 20, allow_nan=False)


def test_qpsk():
    c = from_key("qpsk")
    assert set(c.points) == {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}
    assert np.isclose(c.Es, 2.0)
    assert c.alpha == 1.0


def test_4pam():
    c = from_key("4pam")
    np.testing.assert_array_equal(np.sort(c.points), [-3, -1, 1, 3])
    assert np.isclose(c.Es, 5.0)
    assert c.alpha == 3.0
    assert not c.is_complex


def test_16qam_separable():
    c = from_key("16qam")
    assert c.points.size == 16
    assert set(np.unique(c.points.real)) == {-3.0, -1.0, 1.0, 3.0}
    assert set(np.unique(c.points.real)) == set(np.unique(c.points.imag))
    assert c.is_separable()
    assert np.isclose(c.Es, 10.0)


@pytest.mark.parametrize("key", sorted(CONSTELLATION_KEYS))
def test_statistics(key):
    c = from_key(key)
    assert np.isclose(c.prior_probs.sum(), 1.0)
    assert np.isclose(c.Es, np.sum(c.prior_probs * np.abs(c.points) ** 2))
    assert c.alpha == c.M - 1
    assert abs(c.mean) < 1e-15


@pytest.mark.parametrize("M", [2, 4, 8, 16])
def test_pam_energy(M):
    assert np.isclose(make_constellation("pam", M).Es, (M * M - 1) / 3)


def test_normalized_grid():
    c = make_constellation("qam", 4, normalize=True)
    assert np.isclose(c.Es, 1.0)
    assert np.isclose(c.alpha, 3 * c.scale)


@pytest.mark.parametrize("kind,M", [("pam", 3), ("qam", 32), ("psk", 4), ("pam", 1)])
def test_unsupported(kind, M):
    with pytest.raises(ConfigurationError):
        make_constellation(kind, M)


def test_unknown_key():
    with pytest.raises(ConfigurationError):
        from_key("256qam")


@pytest.mark.parametrize("M", [2, 4, 8, 16])
def test_gray_adjacent_levels_differ_in_one_bit(M):
    bits = make_constellation("pam", M).bits
    assert np.all(np.sum(bits[1:] != bits[:-1], axis=1) == 1)
    assert len({tuple(b) for b in bits}) == M


def test_gray_code():
    assert gray_code(2).tolist() == [0, 1, 3, 2]


def test_gray_map_16qam_neighbours():
    c = from_key("16qam")
    gm = c.gray_map
    assert len(gm) == 16
    for la, a in gm.items():
        for lb, b in gm.items():
            if np.isclose(abs(a - b), 2.0):
                assert sum(x != y for x, y in zip(la, lb)) == 1


def test_slice_examples():
    assert from_key("qpsk").slice(0.2 + 0.9j) == 1 + 1j
    assert from_key("qpsk").slice(0.0) == -1 - 1j
    assert from_key("4pam").slice(2.1) == 3


def test_slice_nonfinite():
    with pytest.raises(ValueError):
        slice_symbols(np.array([np.nan]), from_key("qpsk"))


@pytest.mark.parametrize("key", ["qpsk", "16qam", "64qam", "4pam", "bpsk"])
def test_slice_fixes_points(key):
    c = from_key(key)
    np.testing.assert_array_equal(c.slice(c.points), c.points)


@given(finite, finite)
def test_slice_matches_bruteforce_and_idempotent(x, y):
    for key in ("qpsk", "16qam", "64qam"):
        c = from_key(key)
        z = complex(x, y)
        s = c.slice(z)
        assert abs(z - s) <= abs(z - nearest_point(z, c.points)) + 1e-12
        assert c.slice(s) == s


@given(finite)
def test_slice_real(x):
    c = from_key("4pam")
    s = c.slice(x)
    assert abs(x - s) <= abs(x - nearest_point(x, c.points)) + 1e-12


def test_slice_tie_break_lexicographic():
    c = from_key("16qam")
    # Equidistant from 1+1j, 3+1j, 1+3j, 3+3j.
    assert c.slice(2 + 2j) == 1 + 1j
    assert c.slice(2 - 4j) == 1 - 3j


def test_slice_resolves_tiny_offsets_from_midpoint():
    c = from_key("16qam")
    assert c.slice(2.220446049250313e-16j) == -1 + 1j
    assert c.slice(-2.220446049250313e-16j) == -1 - 1j


@given(st.integers(0, 2), st.floats(0, 1e-3))
def test_slice_near_threshold(j, eps):
    c = from_key("4pam")
    t = float(-2 + 2 * j)
    up = max(np.nextafter(t, np.inf), t + eps)
    dn = min(np.nextafter(t, -np.inf), t - eps)
    assert c.slice(up) == t + 1
    assert c.slice(dn) == t - 1
    assert c.slice(t) == t - 1
