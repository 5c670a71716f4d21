import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassbeam import designs
from wassbeam.designs import (
    InfeasibleRadius,
    WassersteinBall,
    certificate_of_robustness,
    design_diag_load,
    design_mvdr_smi,
    design_wdro_joint,
    design_wdro_mahalanobis,
    design_wdro_norm,
    epsilon_from_beta,
    lambda_star,
    mahalanobis_feasible,
)
from wassbeam.scenario import SteeringSampleSet
from wassbeam.verify import random_instance

seeds = st.integers(0, 2**32 - 1)


def test_norm_design_identity_example():
    d = design_wdro_norm(np.eye(2), [2.0, 0.0], 1.0)
    np.testing.assert_allclose(d.weights_lifted, [1.0, 0.0], atol=1e-8)
    assert d.multiplier == pytest.approx(1.0, abs=1e-8)
    assert d.status == "optimal"


def test_norm_design_nonidentity_example():
    d = design_wdro_norm(np.diag([1.0, 4.0]), [1.0, 1.0], 0.0)
    np.testing.assert_allclose(d.weights_lifted, [0.8, 0.2], atol=1e-12)


@pytest.mark.parametrize("eps", [2.0, 3.0])
def test_radius_at_or_beyond_bound_raises(eps):
    with pytest.raises(InfeasibleRadius, match="feasibility bound"):
        design_wdro_norm(np.eye(2), [2.0, 0.0], eps)


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        design_wdro_norm(np.eye(2), [2.0, 0.0], -0.1)


def test_mahalanobis_feasibility_threshold():
    a = np.array([2.0, 0.0])
    lam = np.diag([0.5, 3.0])  # a^T Lam a = 2
    assert mahalanobis_feasible(a, 0.99, lam)
    assert not mahalanobis_feasible(a, 1.0, lam)
    design_wdro_mahalanobis(np.eye(2), a, 0.99, lam)
    with pytest.raises(InfeasibleRadius):
        design_wdro_mahalanobis(np.eye(2), a, 1.0, lam)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_mahalanobis_infeasible_exactly_beyond_threshold(seed):
    rng = np.random.default_rng(seed)
    R, samples, metric, _ = random_instance(rng)
    limit = 0.5 * samples.mean @ metric @ samples.mean
    design_wdro_mahalanobis(R, samples, 0.98 * limit, metric)
    with pytest.raises(InfeasibleRadius):
        design_wdro_mahalanobis(R, samples, 1.02 * limit, metric)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.05, 0.95))
def test_norm_design_properties(seed, frac):
    rng = np.random.default_rng(seed)
    R, samples, _, _ = random_instance(rng)
    eps = frac * np.linalg.norm(samples.mean)
    d = design_wdro_norm(R, samples, eps)
    w = d.weights_lifted
    assert abs(eps * np.linalg.norm(w) - (w @ samples.mean - 1)) <= 1e-8
    assert d.multiplier == pytest.approx(np.linalg.norm(w), abs=1e-12)
    # the robust design never beats MVDR on the nominal objective
    assert d.objective >= design_mvdr_smi(R, samples).objective * (1 - 1e-9)
    # robust constraint implies the distortionless constraint
    assert w @ samples.mean >= 1 - 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.05, 0.95))
def test_mahalanobis_multiplier_matches_closed_form(seed, frac):
    rng = np.random.default_rng(seed)
    R, samples, metric, _ = random_instance(rng)
    eps = frac * 0.5 * samples.mean @ metric @ samples.mean
    d = design_wdro_mahalanobis(R, samples, eps, metric)
    w = d.weights_lifted
    gamma_inv = np.linalg.inv(designs.spd_sqrt(metric))
    assert abs(np.sqrt(2 * eps) * np.linalg.norm(gamma_inv @ w) - (w @ samples.mean - 1)) <= 1e-8
    assert d.multiplier == pytest.approx(lambda_star(w, metric, eps), rel=1e-10)
    assert certificate_of_robustness(d) == pytest.approx(d.multiplier, rel=1e-10)


def test_default_lambda_is_inverse_covariance():
    R = np.diag([1.0, 2.0, 4.0, 8.0])
    d = design_wdro_mahalanobis(R, [1.0, 1.0, 0.0, 0.0], 0.1)
    np.testing.assert_allclose(d.lambda_mat, np.diag([1.0, 0.5, 0.25, 0.125]))


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.0, 5.0))
def test_joint_at_zero_radius_is_diagonal_loading(seed, rho):
    rng = np.random.default_rng(seed)
    R, samples, _, _ = random_instance(rng)
    dj = design_wdro_joint(R, samples, 0.0, rho)
    dl = design_diag_load(R, samples, rho)
    np.testing.assert_allclose(dj.weights_lifted, dl.weights_lifted, atol=1e-10, rtol=0)
    # loading is the norm design on the loaded covariance
    dn = design_wdro_joint(R, samples, 0.3, rho)
    ref = design_wdro_norm(R + rho * np.eye(R.shape[0]), samples, 0.3)
    np.testing.assert_allclose(dn.weights_lifted, ref.weights_lifted, atol=1e-12)


def test_diag_load_multiplier_is_squared_norm():
    d = design_diag_load(np.eye(2), [2.0, 0.0], 1.0)
    np.testing.assert_allclose(d.weights_lifted, [0.5, 0.0])
    assert d.multiplier == pytest.approx(0.25)
    assert d.objective == pytest.approx(0.5)


def test_singular_covariance_flags_regularization():
    d = design_mvdr_smi(np.diag([1.0, 0.0]), [1.0, 0.0])
    assert d.regularized


def test_non_psd_covariance_rejected():
    with pytest.raises(ValueError):
        design_mvdr_smi(np.diag([1.0, -1.0]), [1.0, 0.0])


def test_epsilon_from_beta():
    # chi2 with 2 dof is Exp(1/2): half its quantile is -log(1 - beta)
    assert epsilon_from_beta(1, 0.95) == pytest.approx(-np.log(0.05), rel=1e-10)
    with pytest.raises(ValueError):
        epsilon_from_beta(3, 1.0)


def test_certificate_undefined_for_non_robust_methods():
    with pytest.raises(ValueError):
        certificate_of_robustness(design_mvdr_smi(np.eye(2), [1.0, 0.0]))


def test_ball_validation_and_costs():
    with pytest.raises(ValueError):
        WassersteinBall(-1.0)
    with pytest.raises(ValueError):
        WassersteinBall(1.0, "mahalanobis")
    with pytest.raises(ValueError):
        WassersteinBall(1.0, order=2)
    ball = WassersteinBall(1.0, "mahalanobis", np.diag([2.0, 1.0]))
    assert ball.ground_cost([1.0, 0.0], [0.0, 0.0]) == pytest.approx(1.0)
    assert WassersteinBall(1.0).ground_cost([3.0, 4.0], [0.0, 0.0]) == pytest.approx(5.0)
    assert WassersteinBall(1.0, "frobenius").ground_cost(np.eye(2), np.zeros((2, 2))) == pytest.approx(np.sqrt(2))


def test_design_serialization_round_trip():
    d = design_wdro_norm(np.eye(4), SteeringSampleSet(np.array([[1.0, 1.0, 0.0, 0.0]])), 0.5)
    doc = d.to_dict()
    w = np.array(doc["weights"]["re"]) + 1j * np.array(doc["weights"]["im"])
    np.testing.assert_array_equal(w, d.weights_complex)
    assert doc["status"] == "optimal"
