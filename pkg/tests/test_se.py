import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlama.amp import DetectorConfig
from mlama.constellation import from_key, make_constellation
from mlama.denoisers import FAMILIES, Denoiser
from mlama.exceptions import AnalysisError
from mlama.se import (
    Phi,
    Q,
    fixed_point,
    mrt,
    pam_ser,
    psi_mm,
    psi_pam_clip,
    psi_qam_clip,
    se_trajectory,
    ser_predict,
    write_trajectory_csv,
)
from mlama.special import gaussian_rule, hermite_rule
from mlama.tuning import TuningPolicy, tune_tau

QPSK = from_key("qpsk")
QAM16 = from_key("16qam")
QPSK1 = make_constellation("qam", 2, normalize=True)  # Es = 1


def gaussian_psi(s2, tau, Es):
    return (Es**2 * s2 + Es * tau**2) / (Es + tau) ** 2


# -- kernels ------------------------------------------------------------------


def test_q_phi():
    assert Q(0.0) == 0.5
    x = np.linspace(-10, 10, 101)
    np.testing.assert_allclose(Phi(x) + Q(x), 1.0, atol=1e-15)
    assert abs(Q(1.0) - 0.15865525393145707) < 1e-15
    assert Q(37.0) > 0


def test_gaussian_rule_moments():
    x, w = gaussian_rule(0.3, 0.7, breakpoints=(0.1, 1.0))
    assert abs(w.sum() - 1) < 1e-15
    assert abs(w @ x - 0.3) < 1e-14
    assert abs(w @ (x - 0.3) ** 2 - 0.49) < 1e-14


def test_quadrature_choice_on_clipped_mse():
    # Clipping makes the integrand kinked; a plain 61-node Gauss-Hermite rule
    # misses the closed form by ~1e-4 while the breakpoint-aware rule does not.
    s2, alpha = 0.8, 3.0
    ref = psi_pam_clip(s2, 4)

    def mse(rule):
        total = 0.0
        for b in (-3.0, -1.0, 1.0, 3.0):
            x, w = rule(b)
            total += 0.25 * (w @ (np.clip(x, -alpha, alpha) - b) ** 2)
        return total

    herm_err = abs(mse(lambda b: hermite_rule(b, math.sqrt(s2))) - ref)
    gl_err = abs(mse(lambda b: gaussian_rule(b, math.sqrt(s2), (-alpha, alpha))) - ref)
    assert herm_err > 1e-6
    assert gl_err < 1e-12
    assert abs(psi_mm(s2, 0.0, Denoiser("clip", from_key("4pam"))) - ref) < 1e-12


# -- mismatched MSE -----------------------------------------------------------


@given(st.floats(1e-4, 20), st.floats(0, 50), st.sampled_from(["qpsk", "16qam", "4pam"]))
def test_gaussian_psi_closed_form(s2, tau, key):
    c = from_key(key)
    assert abs(psi_mm(s2, tau, Denoiser("gaussian", c)) - gaussian_psi(s2, tau, c.Es)) < 1e-10 * (1 + c.Es)


@pytest.mark.parametrize("key", ["qpsk", "16qam", "64qam"])
def test_clip_noiseless(key):
    assert psi_mm(0.0, 0.0, Denoiser("clip", from_key(key))) == 0.0


@pytest.mark.parametrize("s2", [1e-3, 0.1, 0.4, 0.8, 3.0, 10.0, 50.0])
def test_qam_clip_closed_form(s2):
    for M, key in ((2, "qpsk"), (4, "16qam"), (8, "64qam")):
        assert abs(psi_mm(s2, 0.0, Denoiser("clip", from_key(key))) - psi_qam_clip(s2, M)) < 1e-8 * max(1, s2)


@pytest.mark.parametrize("s2", [1e-3, 0.4, 0.8, 3.0, 20.0])
@pytest.mark.parametrize("M", [2, 4, 8])
def test_pam_clip_closed_form(s2, M):
    c = make_constellation("pam", M)
    assert abs(psi_mm(s2, 0.0, Denoiser("clip", c)) - psi_pam_clip(s2, M)) < 1e-10 * max(1, s2)


def test_qam_clip_separable_relation():
    for s2 in (0.1, 1.0, 5.0):
        assert abs(psi_qam_clip(s2, 4) - 2 * psi_pam_clip(s2 / 2, 4)) < 1e-13


def test_closed_forms_vanish():
    assert psi_qam_clip(0.0, 4) == 0.0
    assert psi_qam_clip(1e-12, 4) < 1e-11


def test_qpsk_clip_slope_at_zero():
    h = 1e-8
    slope = (psi_qam_clip(2 * h, 2) - psi_qam_clip(h, 2)) / h
    assert abs(slope - 0.5) < 1e-6


@settings(max_examples=15)
@given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.sampled_from(FAMILIES))
def test_psi_routes_agree(s2, tau, fam):
    den = Denoiser(fam, QAM16)
    a = psi_mm(s2, tau, den, route="separable")
    b = psi_mm(s2, tau, den, route="2d")
    assert abs(a - b) < 1e-9 * max(1, a)
    assert a >= 0


def test_separable_route_needs_separable():
    with pytest.raises(AnalysisError):
        psi_mm(-1.0, 1.0, Denoiser("clip", QPSK))


def test_psi_domain():
    with pytest.raises(AnalysisError):
        psi_mm(-0.1, 1.0, Denoiser("gaussian", QPSK))


@given(st.floats(1e-3, 10), st.floats(1e-4, 100))
def test_optimal_tau_beats_arbitrary_tau(s2, tau):
    den = Denoiser("hypercube", QPSK)
    tstar = float(tune_tau(s2, den))
    assert psi_mm(s2, tstar, den) <= psi_mm(s2, tau, den) + 1e-12


# -- SE recursions ------------------------------------------------------------


def test_gaussian_trajectory_matches_recursion():
    N0, beta, Es = 0.1, 0.5, 1.0
    traj = se_trajectory(N0, beta, DetectorConfig(Denoiser("gaussian", QPSK1), t_max=20))
    s2 = N0 + beta * Es
    assert traj.sigma2[0] == s2
    for t in range(20):
        s2 = N0 + beta * Es * s2 / (Es + s2)
        assert abs(traj.sigma2[t + 1] - s2) < 1e-9
    assert len(traj.sigma2) == 21 and len(traj.tau_star) == 20


def test_gaussian_fixed_point_root():
    root = (-0.4 + math.sqrt(0.56)) / 2
    fp = fixed_point(0.1, 0.5, DetectorConfig(Denoiser("gaussian", QPSK1)))
    assert abs(fp - root) < 1e-10
    assert abs(fp - 0.1741657) < 1e-6


def test_mf_recursion_is_constant():
    cfg = DetectorConfig(Denoiser("gaussian", QPSK), TuningPolicy("limit-infinity"), t_max=5)
    traj = se_trajectory(0.3, 0.5, cfg)
    np.testing.assert_allclose(traj.sigma2, 0.3 + 0.5 * QPSK.var, rtol=1e-12)


def test_zf_fixed_point():
    cfg = DetectorConfig(Denoiser("gaussian", QPSK), TuningPolicy("limit-zero"))
    assert abs(fixed_point(0.1, 0.5, cfg) - 0.2) < 1e-10


def test_initial_value_exact():
    for fam in ("exact", "clip", "gray"):
        traj = se_trajectory(0.05, 0.5, Denoiser(fam, QAM16), t_max=2)
        assert traj.sigma2[0] == 0.05 + 0.5 * QAM16.var


def test_noiseless_clip_fixed_point_is_zero():
    for c, beta in ((QPSK, 1.5), (QAM16, 1.2)):
        assert fixed_point(0.0, beta, DetectorConfig(Denoiser("clip", c))) < 1e-10


def test_exact_prior_matches_matched_se():
    # Optimal tuning of the exact prior reduces to tau = sigma2 (no mismatch).
    for N0 in (0.05, 0.3):
        a = fixed_point(N0, 0.5, DetectorConfig(Denoiser("exact", QPSK)))
        b = fixed_point(N0, 0.5, DetectorConfig(Denoiser("exact", QPSK), TuningPolicy("match-sigma")))
        assert a == b


def test_convergence_flag():
    traj = se_trajectory(0.1, 0.5, DetectorConfig(Denoiser("gaussian", QPSK), t_max=200))
    assert traj.converged and traj.fixed_point == traj.final
    assert not se_trajectory(0.1, 0.5, DetectorConfig(Denoiser("gaussian", QPSK), t_max=2)).converged


def test_fixed_point_exhaustion():
    with pytest.raises(AnalysisError):
        fixed_point(0.1, 0.5, DetectorConfig(Denoiser("gaussian", QPSK)), max_iter=3)


def test_se_domain():
    with pytest.raises(AnalysisError):
        se_trajectory(-1.0, 0.5, Denoiser("gaussian", QPSK))


# -- MRT ----------------------------------------------------------------------


def test_mrt_values():
    assert abs(mrt(Denoiser("clip", QPSK)) - 2.0) < 1e-3
    assert abs(mrt(Denoiser("clip", QAM16)) - 4 / 3) < 1e-3
    assert abs(mrt(Denoiser("gaussian", QPSK)) - 1.0) < 1e-3


# -- SER ----------------------------------------------------------------------


def test_ser_examples():
    bpsk = from_key("bpsk")
    assert abs(ser_predict(1.0, bpsk) - 0.158655) < 1e-6
    q1 = Q(1.0)
    assert abs(ser_predict(2.0, QPSK) - (1 - (1 - q1) ** 2)) < 1e-15
    assert ser_predict(0.0, QPSK) == 0.0
    assert abs(pam_ser(1.0, 4) - 1.5 * q1) < 1e-15


@given(st.floats(1e-2, 10))
def test_ser_monotone(s2):
    assert ser_predict(s2, QAM16) < ser_predict(1.01 * s2, QAM16)


def test_trajectory_csv(tmp_path):
    traj = se_trajectory(0.1, 0.5, Denoiser("hypercube", QPSK), t_max=3)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["t", "sigma2", "tau_star", "ser_pred"]
    assert [float(r["sigma2"]) for r in rows] == traj.sigma2
    assert float(rows[1]["tau_star"]) == traj.tau_star[1]
