import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassbeam.cone import (
    ConeProblem,
    kkt_residuals,
    mvdr_closed_form,
    solve_cone,
    strictly_feasible_direction,
)


def test_identity_example():
    rep = solve_cone(ConeProblem(np.eye(2), np.eye(2), [2.0, 0.0]))
    assert rep.status == "optimal"
    np.testing.assert_allclose(rep.x_opt, [1.0, 0.0], atol=1e-8)
    assert rep.objective == pytest.approx(1.0, abs=1e-8)
    assert rep.kkt.max() <= 1e-8


def test_zero_radius_is_mvdr():
    rep = solve_cone(ConeProblem(np.eye(2), np.zeros((2, 2)), [2.0, 0.0]))
    np.testing.assert_allclose(rep.x_opt, [0.5, 0.0], atol=1e-8)


def test_radius_beyond_mean_norm_is_infeasible():
    rep = solve_cone(ConeProblem(np.eye(2), 2.0 * np.eye(2), [2.0, 0.0]))
    assert rep.status == "infeasible"
    assert not rep.optimal
    assert strictly_feasible_direction(2.0 * np.eye(2), np.array([2.0, 0.0])) is None


def test_nonpositive_offset_gives_zero():
    rep = solve_cone(ConeProblem(np.eye(2), np.eye(2), [1.0, 0.0], c=0.0))
    np.testing.assert_array_equal(rep.x_opt, 0.0)
    assert rep.status == "optimal"


def test_feasible_direction_when_b_outside_row_space():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    d = strictly_feasible_direction(5.0 * A, np.array([1.0, 1.0]))
    assert d is not None
    assert d @ np.array([1.0, 1.0]) > np.linalg.norm(5.0 * A @ d)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(P=np.eye(2), A=np.eye(2), b=[1.0, 0.0, 0.0]),
        dict(P=np.eye(2), A=np.eye(3), b=[1.0, 0.0]),
        dict(P=np.array([[1.0, 1.0], [0.0, 1.0]]), A=np.eye(2), b=[1.0, 0.0]),
    ],
)
def test_problem_validation(kwargs):
    with pytest.raises(ValueError):
        ConeProblem(**kwargs)


def test_multiplier_is_twice_objective_at_unit_offset():
    # stationarity 2Px = mu (b - A^T A x/||Ax||) dotted with x gives mu = 2 x^T P x when c = 1
    rep = solve_cone(ConeProblem(np.eye(2), np.eye(2), [2.0, 0.0]))
    assert rep.multiplier == pytest.approx(2.0, abs=1e-8)
    assert rep.multiplier == pytest.approx(2.0 * rep.objective, rel=1e-8)


def test_singular_p_is_regularized():
    P = np.diag([1.0, 0.0])
    rep = solve_cone(ConeProblem(P, 0.5 * np.eye(2), [2.0, 0.0]))
    assert rep.regularized
    assert rep.status == "optimal"


def test_mvdr_closed_form_rejects_singular():
    with pytest.raises(ValueError):
        mvdr_closed_form(np.diag([1.0, 0.0]), [1.0, 0.0])


def _random_problem(rng, n):
    x = rng.standard_normal((n, n))
    P = x @ x.T / n + 0.05 * np.eye(n)
    b = rng.standard_normal(n)
    k = rng.integers(1, n + 1)
    A = rng.standard_normal((k, n))
    A *= rng.uniform(0.05, 0.95) * np.linalg.norm(b) / np.linalg.norm(A, 2)
    return ConeProblem(P, A, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_random_problems_reach_kkt_tolerance(seed, n):
    rng = np.random.default_rng(seed)
    prob = _random_problem(rng, n)
    rep = solve_cone(prob)
    assert rep.status == "optimal"
    assert rep.kkt.max() <= 1e-8
    res = kkt_residuals(prob, rep.x_opt, rep.multiplier)
    assert res.max() <= 1e-8
    assert rep.iterations <= 200
    # no random feasible point does better
    for _ in range(50):
        x = rng.standard_normal(n)
        gap = prob.b @ x - np.linalg.norm(prob.A @ x)
        if gap > 0:
            x /= gap
            assert prob.objective(x) >= rep.objective * (1 - 1e-8) - 1e-12


def test_report_serializes():
    rep = solve_cone(ConeProblem(np.eye(2), np.eye(2), [2.0, 0.0]))
    d = rep.to_dict()
    assert d["status"] == "optimal"
    assert set(d["kkt"]) == {"primal_feas", "stationarity", "comp_slack"}
