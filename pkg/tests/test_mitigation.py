"""Confusion-matrix mitigation and the surrounding statistics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reupsim.backend import (DEFAULT_CONFUSION, IdealBackend, NoiseModel,
                             NoisyBackend)
from reupsim.circuits import Ansatz, CircuitSpec, measure_label
from reupsim.costs import CostKind
from reupsim.data import Dataset, generate
from reupsim.mitigation import (CalibrationMatrix, calibrate, decision_threshold,
                                gradient_noise_report, mitigate,
                                mitigate_estimate, noise_scaling,
                                observation_pairs, pole_preparations,
                                residual_analysis)

DIAG = st.floats(0.55, 0.999)
PROB = st.floats(0.0, 1.0)


@given(DIAG, DIAG, PROB)
@settings(max_examples=60)
def test_mitigation_inverts_the_confusion_exactly(d0, d1, p1):
    cal = CalibrationMatrix(((d0, 1.0 - d0), (1.0 - d1, d1)))
    p = np.array([1.0 - p1, p1])
    observed = cal.as_array.T @ p
    np.testing.assert_allclose(mitigate(observed, cal), p, atol=1e-9)


def test_mitigation_clips_out_of_range_observations():
    cal = CalibrationMatrix(DEFAULT_CONFUSION)
    # an observed frequency more extreme than the confusion can produce
    out = mitigate(np.array([0.05, 0.95]), cal)
    assert out.min() >= 0.0
    assert out.sum() == pytest.approx(1.0)


def test_mitigate_estimate_matches_the_pair_form():
    cal = CalibrationMatrix(DEFAULT_CONFUSION)
    value = 0.61
    full = mitigate(np.array([1.0 - value, value]), cal)
    assert mitigate_estimate(value, 1, cal) == pytest.approx(full[1])
    with pytest.raises(ValueError, match="label"):
        mitigate_estimate(0.5, 2, cal)


def test_decision_threshold_maps_to_half():
    cal = CalibrationMatrix(DEFAULT_CONFUSION)
    for y in (0, 1):
        t = decision_threshold(y, cal)
        assert mitigate_estimate(t, y, cal) == pytest.approx(0.5)


def test_calibration_matrix_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        CalibrationMatrix(((0.9, 0.2), (0.1, 0.8)))
    with pytest.raises(ValueError, match="singular"):
        CalibrationMatrix(((0.5, 0.5), (0.5, 0.5)))


def test_pole_preparations_reach_both_poles_under_every_ansatz():
    for ansatz in Ansatz:
        spec = CircuitSpec(ansatz, 4)
        theta0, theta1 = pole_preparations(spec)
        x = np.array([1.0, 0.0])
        assert measure_label(spec, theta0, x, 0) == pytest.approx(1.0, abs=1e-12)
        assert measure_label(spec, theta1, x, 1) == pytest.approx(1.0, abs=1e-12)


def test_calibrate_on_the_ideal_backend_is_the_identity():
    cal = calibrate(IdealBackend(), CircuitSpec(), shots=1000)
    np.testing.assert_allclose(cal.as_array, np.eye(2), atol=1e-12)


def test_calibrate_recovers_the_confusion_matrix():
    noise = NoiseModel(shots=500, residual_sigma=0.0, seed=21)
    cal = calibrate(NoisyBackend(noise), CircuitSpec(), shots=100_000)
    np.testing.assert_allclose(cal.as_array, np.asarray(DEFAULT_CONFUSION),
                               atol=0.01)


def test_residual_analysis_recovers_a_synthetic_line():
    x = np.linspace(0.0, 1.0, 60)
    rng = np.random.default_rng(17)
    noise = 0.01 * rng.standard_normal(60)
    pairs = np.column_stack([x, 0.24 + 0.6 * x + noise])
    report = residual_analysis(pairs)
    assert report.slope == pytest.approx(0.6, abs=0.02)
    assert report.intercept == pytest.approx(0.24, abs=0.01)
    assert report.residual_mean == pytest.approx(0.0, abs=1e-12)
    assert report.residual_std == pytest.approx(0.01, abs=0.005)
    assert report.n_pairs == 60


def test_residual_analysis_validation():
    with pytest.raises(ValueError, match="at least 3"):
        residual_analysis(np.zeros((2, 2)))
    flat = np.column_stack([np.full(5, 0.3), np.linspace(0, 1, 5)])
    with pytest.raises(ValueError, match="degenerate"):
        residual_analysis(flat)
    with pytest.raises(ValueError, match="shape"):
        residual_analysis(np.zeros((5, 3)))


def test_observation_pairs_columns():
    spec = CircuitSpec()
    ds = generate(12, seed=19)
    cal = CalibrationMatrix(DEFAULT_CONFUSION)
    pairs = observation_pairs(spec, ds, IdealBackend(), seed=19, cal=cal)
    assert pairs.shape == (12, 3)
    # ideal backend: observed equals theoretical, both in [0, 1]
    np.testing.assert_allclose(pairs[:, 1], pairs[:, 0], atol=1e-12)
    assert pairs[:, 0].min() >= 0.0 and pairs[:, 0].max() <= 1.0
    for theo, obs, mit in pairs:
        assert mit == pytest.approx(mitigate_estimate(obs, 1, cal))


def test_observation_pairs_with_a_fixed_theta():
    spec = CircuitSpec()
    ds = generate(6, seed=20)
    theta = np.zeros(spec.n_params)
    pairs = observation_pairs(spec, ds, IdealBackend(), theta=theta)
    assert pairs.shape == (6, 2)
    # all-zero parameters leave the state at the |0> pole
    np.testing.assert_allclose(pairs[:, 0], 0.0, atol=1e-12)


def test_noise_scaling_sees_the_square_root_law():
    spec = CircuitSpec(Ansatz.A2A, 4)
    theta = np.zeros(16)
    theta[2] = 1.0
    point = Dataset(np.array([[0.0, 0.0]]), np.array([1]))
    report = noise_scaling(spec, theta, point, [50, 200, 800], repeats=400, seed=3)
    assert -0.62 < report.exponent < -0.38
    assert report.stds[0] > report.stds[-1]


def test_noise_scaling_validation():
    spec = CircuitSpec()
    ds = generate(3, seed=0)
    theta = np.zeros(16)
    with pytest.raises(ValueError, match="distinct"):
        noise_scaling(spec, theta, ds, [100, 100])
    with pytest.raises(ValueError, match=">= 1"):
        noise_scaling(spec, theta, ds, [0, 100])


def test_gradient_noise_report_ideal_leg_always_agrees():
    spec = CircuitSpec()
    ds = generate(8, seed=22)
    theta = np.random.default_rng(22).uniform(-np.pi, np.pi, 16)
    report = gradient_noise_report(spec, theta, ds, noise=None, steps=[0.1],
                                   repeats=3, kinds=(CostKind.CROSS_ENTROPY,))
    assert report.mean_sign_agreement(CostKind.CROSS_ENTROPY) == 1.0
    assert report.max_abs_theoretical(CostKind.CROSS_ENTROPY) > 0.0
    with pytest.raises(ValueError, match="no rows"):
        report.max_abs_theoretical(CostKind.CHI_SQUARED)
