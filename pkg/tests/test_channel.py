import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlama.channel import draw_channel, draw_instance, snr_to_n0, transmit, trial_rng
from mlama.constellation import from_key
from mlama.exceptions import ConfigurationError
from mlama.harness import _draw_block


def test_entry_variance():
    MR = 64
    rng = trial_rng(1, 0)
    H = np.stack([draw_channel(MR, 1, rng)[0, 0] for _ in range(10_000)])
    assert abs(np.mean(np.abs(H) ** 2) * MR - 1) < 0.05
    assert abs(np.var(H.real) * 2 * MR - 1) < 0.05
    assert abs(np.var(H.imag) * 2 * MR - 1) < 0.05


def test_column_norms():
    H = draw_channel(128, 64, trial_rng(2, 0))
    assert abs(np.mean(np.sum(np.abs(H) ** 2, axis=0)) - 1) < 0.05


def test_real_channel():
    H = draw_channel(256, 64, trial_rng(2, 1), real=True)
    assert not np.iscomplexobj(H)
    assert abs(np.mean(np.sum(H**2, axis=0)) - 1) < 0.05


def test_determinism():
    a = draw_channel(8, 4, trial_rng(5, 3))
    b = draw_channel(8, 4, trial_rng(5, 3))
    np.testing.assert_array_equal(a, b)
    c = draw_channel(8, 4, trial_rng(5, 4))
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("MR,MT", [(0, 4), (4, 0)])
def test_zero_dimension(MR, MT):
    with pytest.raises(ConfigurationError):
        draw_channel(MR, MT, trial_rng(0, 0))


def test_snr_examples():
    assert np.isclose(snr_to_n0(0, 0.5, 2), 1.0)
    assert np.isclose(snr_to_n0(10, 0.5, 2), 0.1)
    assert snr_to_n0(400, 0.5, 2) < 1e-39


@given(st.floats(-30, 60), st.floats(0.01, 4), st.floats(0.1, 50))
def test_snr_roundtrip(snr, beta, Es):
    N0 = snr_to_n0(snr, beta, Es)
    assert np.isclose(10 * np.log10(beta * Es / N0), snr)


def test_noiseless_transmit():
    rng = trial_rng(0, 0)
    H = draw_channel(6, 3, rng)
    s0 = np.array([1 + 1j, -1 + 1j, 1 - 1j])
    y, n = transmit(H, s0, 0.0, rng)
    np.testing.assert_array_equal(n, 0)
    np.testing.assert_allclose(y, H @ s0)


def test_noise_statistics():
    MR, N0 = 128, 0.3
    rng = trial_rng(9, 0)
    H = np.zeros((MR, 1), dtype=complex)
    ns = np.stack([transmit(H, np.zeros(1, dtype=complex), N0, rng)[1] for _ in range(1000)])
    assert abs(np.mean(np.sum(np.abs(ns) ** 2, axis=1)) / MR / N0 - 1) < 0.05
    assert abs(np.var(ns.real) / (N0 / 2) - 1) < 0.05
    assert abs(np.var(ns.imag) / (N0 / 2) - 1) < 0.05
    assert abs(np.mean(ns.real * ns.imag)) < 0.01 * N0


def test_instance_consistency():
    c = from_key("16qam")
    inst = draw_instance(c, 16, 8, 0.2, trial_rng(4, 7))
    np.testing.assert_array_equal(inst.y, inst.H @ inst.s0 + inst.n)
    assert inst.beta == 0.5
    assert np.all(np.isin(inst.s0, c.points))


def test_pam_instance_is_real():
    inst = draw_instance(from_key("4pam"), 16, 8, 0.2, trial_rng(4, 7))
    for a in (inst.H, inst.s0, inst.n, inst.y):
        assert not np.iscomplexobj(a)


def test_harness_blocks_match_instances():
    # Sweep blocks reuse the per-trial streams of draw_instance, with unit noise.
    c = from_key("qpsk")
    N0 = 0.25
    s0, H, w = _draw_block(c, 12, 6, 3, 10, 2)
    for i in range(2):
        inst = draw_instance(c, 12, 6, N0, trial_rng(3, 10 + i))
        np.testing.assert_array_equal(s0[i], inst.s0)
        np.testing.assert_array_equal(H[i], inst.H)
        np.testing.assert_allclose(np.sqrt(N0) * w[i], inst.n, rtol=1e-14)
