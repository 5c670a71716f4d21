"""Beamformer designs under Wasserstein uncertainty.

All designs work on lifted (real-valued) quantities and minimize
``w^T R w`` subject to a distortionless constraint whose form depends on the
uncertainty model:

* ``mvdr_smi``          ``w^T a_bar >= 1``
* ``wdro_norm``         ``eps ||w||_2 <= w^T a_bar - 1``
* ``wdro_mahalanobis``  ``sqrt(2 eps) ||Gamma^{-1} w||_2 <= w^T a_bar - 1``
* ``diag_load``         objective ``w^T (R + rho I) w``, constraint as MVDR
* ``wdro_joint``        loaded objective with the ``wdro_norm`` constraint

Each DRO design also carries the optimal dual variable of the inner
worst-case expectation problem, which certifies robustness over the ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cone import DEFAULT_TOL, REGULARIZATION, ConeProblem, SolveReport, mvdr_weights, solve_cone
from .scenario import SteeringSampleSet, unlift_vector
from .special import chi2_quantile

METHODS = ("mvdr_smi", "wdro_norm", "wdro_mahalanobis", "diag_load", "wdro_joint")
COSTS = ("euclidean_norm", "mahalanobis", "frobenius")


class InfeasibleRadius(ValueError):
    """The Wasserstein radius leaves no beamformer satisfying the constraint."""


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class WassersteinBall:
    """A 1-Wasserstein ball; ``metric`` is the SPD matrix of the quadratic cost."""

    radius: float
    cost: str = "euclidean_norm"
    metric: np.ndarray | None = None
    order: int = 1

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.cost not in COSTS:
            raise ValueError(f"unknown cost {self.cost!r}")
        if self.order != 1:
            raise ValueError("only order-1 Wasserstein balls are supported")
        if self.cost == "mahalanobis":
            if self.metric is None:
                raise ValueError("mahalanobis cost needs a metric matrix")
            metric = np.asarray(self.metric, dtype=float)
            _check_spd(metric, "metric")
            object.__setattr__(self, "metric", metric)

    def ground_cost(self, x, y) -> np.ndarray:
        """Transport cost between atoms; broadcasts over leading axes."""
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if self.cost == "euclidean_norm":
            return np.linalg.norm(diff, axis=-1)
        if self.cost == "frobenius":
            return np.sqrt(np.sum(diff**2, axis=(-2, -1)))
        return 0.5 * np.einsum("...i,ij,...j->...", diff, self.metric, diff)


@dataclass(frozen=True)
class BeamformerDesign:
    method: str
    weights_lifted: np.ndarray
    multiplier: float
    objective: float
    epsilon: float | None = None
    rho: float | None = None
    beta: float | None = None
    lambda_mat: np.ndarray | None = field(default=None, repr=False)
    report: SolveReport | None = None
    regularized: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.multiplier < 0:
            raise ValueError("multiplier must be nonnegative")

    @property
    def weights_complex(self) -> np.ndarray:
        return unlift_vector(self.weights_lifted)

    @property
    def status(self) -> str:
        return "optimal" if self.report is None else self.report.status

    def to_dict(self) -> dict:
        w = self.weights_complex
        return {
            "method": self.method,
            "epsilon": self.epsilon,
            "rho": self.rho,
            "beta": self.beta,
            "weights": {"re": [float(v) for v in w.real], "im": [float(v) for v in w.imag]},
            "multiplier": self.multiplier,
            "objective": self.objective,
            "status": self.status,
            "regularized": self.regularized,
        }


def _check_spd(m: np.ndarray, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(m - m.T)) > 1e-10:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m).min() <= 1e-12:
        raise ValueError(f"{name} must be positive definite")


def _regularize(R_r) -> tuple[np.ndarray, bool]:
    R_r = np.atleast_2d(np.asarray(R_r, dtype=float))
    if R_r.shape[0] != R_r.shape[1] or np.max(np.abs(R_r - R_r.T)) > 1e-10:
        raise ValueError("covariance must be a symmetric square matrix")
    eig_min = np.linalg.eigvalsh(R_r).min()
    if eig_min < -1e-10:
        raise ValueError("covariance must be positive semidefinite")
    if eig_min < REGULARIZATION:
        return R_r + REGULARIZATION * np.eye(R_r.shape[0]), True
    return R_r, False


def _mean_of(samples) -> np.ndarray:
    if isinstance(samples, SteeringSampleSet):
        return samples.mean
    return np.asarray(samples, dtype=float).ravel()


def spd_sqrt(m) -> np.ndarray:
    """The unique SPD square root via the symmetric eigendecomposition."""
    m = np.asarray(m, dtype=float)
    _check_spd(m, "matrix")
    vals, vecs = np.linalg.eigh(m)
    return (vecs * np.sqrt(vals)) @ vecs.T


def dro_dual_multiplier(w, ball: WassersteinBall) -> float:
    """Minimize the inner DRO dual over ``lam >= 0`` for weights ``w``.

    For norm costs the conjugate term is the indicator of ``lam >= ||w||_*``
    (``||w w^T||_F = ||w||^2`` for the Frobenius ball), so the minimizer is
    the smallest admissible ``lam``. The quadratic cost leaves the smooth
    function ``lam eps + w^T Lambda^{-1} w / (2 lam)``, minimized numerically
    by locating the root of its derivative.
    """
    w = np.asarray(w, dtype=float).ravel()
    if ball.cost == "euclidean_norm":
        return float(np.linalg.norm(w))
    if ball.cost == "frobenius":
        return float(w @ w)
    if ball.radius <= 0:
        raise ValueError("quadratic-cost dual needs a positive radius")
    q = float(w @ np.linalg.solve(ball.metric, w))

    def slope(lam):
        return ball.radius - q / (2.0 * lam * lam)

    lo, hi = 1.0, 1.0
    while slope(lo) > 0:
        lo *= 0.5
    while slope(hi) < 0:
        hi *= 2.0
    return float(brentq(slope, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))


def design_mvdr_smi(R_r, a_bar) -> BeamformerDesign:
    a_bar = _mean_of(a_bar)
    if not np.any(a_bar):
        raise ValueError("mean steering vector must be nonzero")
    R_work, regularized = _regularize(R_r)
    w = mvdr_weights(R_work, a_bar)
    return BeamformerDesign(
        "mvdr_smi", w, 0.0, float(w @ R_work @ w), regularized=regularized
    )


def _solve_or_raise(problem: ConeProblem, tol: float) -> SolveReport:
    report = solve_cone(problem, tol)
    if report.status == "infeasible":
        raise InfeasibleRadius("no beamformer satisfies the robust constraint")
    if report.status != "optimal":
        raise SolverFailure(f"cone solver ended with status {report.status}")
    return report


def design_wdro_norm(R_r, samples, epsilon: float, tol: float = DEFAULT_TOL) -> BeamformerDesign:
    """Euclidean-cost design; feasible only for ``eps < ||a_bar||_2``."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    a_bar = _mean_of(samples)
    bound = float(np.linalg.norm(a_bar))
    if epsilon >= bound:
        raise InfeasibleRadius(
            f"epsilon={epsilon:g} violates the feasibility bound epsilon < ||a_bar||_2 = {bound:g}"
        )
    if epsilon == 0:
        base = design_mvdr_smi(R_r, a_bar)
        w = base.weights_lifted
        return BeamformerDesign(
            "wdro_norm", w, float(np.linalg.norm(w)), base.objective, epsilon=0.0,
            regularized=base.regularized,
        )
    R_work, regularized = _regularize(R_r)
    n = a_bar.size
    report = _solve_or_raise(ConeProblem(R_work, epsilon * np.eye(n), a_bar, 1.0), tol)
    w = report.x_opt
    ball = WassersteinBall(epsilon)
    return BeamformerDesign(
        "wdro_norm", w, dro_dual_multiplier(w, ball), report.objective,
        epsilon=epsilon, report=report, regularized=regularized,
    )


def default_lambda(R_r) -> np.ndarray:
    """Inverse of the (regularized) sample covariance."""
    R_work, _ = _regularize(R_r)
    inv = np.linalg.inv(R_work)
    return 0.5 * (inv + inv.T)


def mahalanobis_feasible(a_bar, epsilon: float, lambda_mat) -> bool:
    """``2 eps < a_bar^T Lambda a_bar``, the quadratic-cost feasibility test."""
    a_bar = np.asarray(a_bar, dtype=float)
    return 2.0 * epsilon < float(a_bar @ np.asarray(lambda_mat) @ a_bar)


def design_wdro_mahalanobis(
    R_r, samples, epsilon: float, lambda_mat=None, tol: float = DEFAULT_TOL, beta: float | None = None
) -> BeamformerDesign:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive for the quadratic cost")
    a_bar = _mean_of(samples)
    lam_mat = default_lambda(R_r) if lambda_mat is None else np.asarray(lambda_mat, dtype=float)
    gamma = spd_sqrt(lam_mat)
    if not mahalanobis_feasible(a_bar, epsilon, lam_mat):
        bound = float(a_bar @ lam_mat @ a_bar)
        raise InfeasibleRadius(
            f"2*epsilon={2 * epsilon:g} violates the feasibility bound 2 eps < a_bar^T Lambda a_bar = {bound:g}"
        )
    R_work, regularized = _regularize(R_r)
    gamma_inv = np.linalg.inv(gamma)
    A = np.sqrt(2.0 * epsilon) * 0.5 * (gamma_inv + gamma_inv.T)
    report = _solve_or_raise(ConeProblem(R_work, A, a_bar, 1.0), tol)
    w = report.x_opt
    ball = WassersteinBall(epsilon, "mahalanobis", lam_mat)
    return BeamformerDesign(
        "wdro_mahalanobis", w, dro_dual_multiplier(w, ball), report.objective,
        epsilon=epsilon, beta=beta, lambda_mat=lam_mat, report=report, regularized=regularized,
    )


def lambda_star(w_r, lambda_mat, epsilon: float) -> float:
    """Closed-form minimizer ``sqrt(w^T Lambda^{-1} w / (2 eps))`` of the quadratic-cost dual."""
    w = np.asarray(w_r, dtype=float).ravel()
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not np.any(w):
        raise ValueError("weight vector must be nonzero")
    q = float(w @ np.linalg.solve(np.asarray(lambda_mat, dtype=float), w))
    return float(np.sqrt(q / (2.0 * epsilon)))


def design_diag_load(R_r, a_bar, rho: float) -> BeamformerDesign:
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    a_bar = _mean_of(a_bar)
    if not np.any(a_bar):
        raise ValueError("mean steering vector must be nonzero")
    R_work, regularized = _regularize(R_r)
    loaded = R_work + rho * np.eye(R_work.shape[0])
    w = mvdr_weights(loaded, a_bar)
    return BeamformerDesign(
        "diag_load", w, float(w @ w), float(w @ loaded @ w), rho=rho, regularized=regularized
    )


def design_wdro_joint(R_r, samples, epsilon: float, rho: float, tol: float = DEFAULT_TOL) -> BeamformerDesign:
    """Loaded objective from the covariance ball, norm constraint from the steering ball."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if epsilon == 0:
        base = design_diag_load(R_r, samples, rho)
    else:
        R_work, _ = _regularize(R_r)
        loaded = R_work + rho * np.eye(R_work.shape[0])
        base = design_wdro_norm(loaded, samples, epsilon, tol)
    w = base.weights_lifted
    return BeamformerDesign(
        "wdro_joint", w, float(np.linalg.norm(w)) if epsilon == 0 else base.multiplier,
        base.objective, epsilon=epsilon, rho=rho, report=base.report, regularized=base.regularized,
    )


def epsilon_from_beta(n_sensors: int, beta: float) -> float:
    """Radius ``chi2_{2N, beta} / 2`` making the ellipsoid a beta-confidence region."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if n_sensors < 1:
        raise ValueError("n_sensors must be positive")
    return 0.5 * chi2_quantile(2 * n_sensors, beta)


def certificate_of_robustness(design: BeamformerDesign) -> float:
    """The dual variable bounding the worst-case expectation over the ball."""
    w = design.weights_lifted
    if design.method in ("wdro_norm", "wdro_joint"):
        return float(np.linalg.norm(w))
    if design.method == "wdro_mahalanobis":
        return lambda_star(w, design.lambda_mat, design.epsilon)
    raise ValueError(f"no robustness certificate for method {design.method!r}")
