"""Brute-force checks of the duality and bound claims behind the designs.

The dual closed forms used by :mod:`wassbeam.designs` are verified here from
the primal side: explicit worst-case distributions are built, their expected
objectives and transport costs are measured directly, and exact discrete
optimal transport re-measures distances to the nominal distribution.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .designs import WassersteinBall
from .scenario import SteeringSampleSet

_EXHAUSTIVE_MAX = 8
MC_BLOCK = 10_000


@dataclass(frozen=True)
class DiscreteDistribution:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        _check_simplex(weights, atoms.shape[0])
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms) -> "DiscreteDistribution":
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        return cls(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))

    @classmethod
    def empirical(cls, samples: SteeringSampleSet) -> "DiscreteDistribution":
        return cls.uniform(samples.samples)

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


@dataclass(frozen=True)
class MatrixDistribution:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 2:
            atoms = atoms[None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        _check_simplex(weights, atoms.shape[0])
        for m in atoms:
            if np.max(np.abs(m - m.T)) > 1e-10 or np.linalg.eigvalsh(m).min() < -1e-10:
                raise ValueError("matrix atoms must be symmetric PSD")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def mean(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.weights, self.atoms)

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


def _check_simplex(weights: np.ndarray, n_atoms: int) -> None:
    if n_atoms < 1:
        raise ValueError("distribution needs at least one atom")
    if weights.size != n_atoms:
        raise ValueError("one weight per atom required")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must lie on the probability simplex")


@dataclass(frozen=True)
class OracleVerdict:
    lhs: float
    rhs: float
    slack: float
    passed: bool
    description: str

    @classmethod
    def compare(cls, lhs: float, rhs: float, description: str, tol: float) -> "OracleVerdict":
        """Verdict on ``lhs <= rhs`` up to ``tol``."""
        slack = float(rhs - lhs)
        return cls(float(lhs), float(rhs), slack, bool(slack >= -tol), description)

    def to_json(self) -> str:
        return json.dumps(
            {
                "description": self.description,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "slack": self.slack,
                "passed": self.passed,
            },
            sort_keys=True,
        )


def _nonzero(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if not np.any(w):
        raise ValueError("weight vector must be nonzero")
    return w


def _expected_loss(dist: DiscreteDistribution, w: np.ndarray) -> float:
    """E[-w^T a] under ``dist``."""
    return float(-(dist.weights @ (dist.atoms @ w)))


def worst_case_shift_norm(samples: SteeringSampleSet, w, epsilon: float):
    """Shift every atom by ``-eps w / ||w||``; returns (distribution, E[-w^T a])."""
    w = _nonzero(w)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    shift = -epsilon * w / np.linalg.norm(w)
    dist = DiscreteDistribution.uniform(samples.samples + shift)
    return dist, _expected_loss(dist, w)


def worst_case_shift_mahalanobis(samples: SteeringSampleSet, w, epsilon: float, lambda_mat):
    """Shift every atom by ``-t Lambda^{-1} w`` with ``t = sqrt(2 eps / w^T Lambda^{-1} w)``."""
    w = _nonzero(w)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    direction = np.linalg.solve(np.asarray(lambda_mat, dtype=float), w)
    t = np.sqrt(2.0 * epsilon / (w @ direction))
    dist = DiscreteDistribution.uniform(samples.samples - t * direction)
    return dist, _expected_loss(dist, w)


def worst_case_inc_shift(R_hat, w, rho: float):
    """Point mass at ``R_hat + rho w w^T / ||w||^2``; returns (distribution, E[w^T R w])."""
    w = _nonzero(w)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    R_hat = np.asarray(R_hat, dtype=float)
    atom = R_hat + rho * np.outer(w, w) / (w @ w)
    dist = MatrixDistribution(atom[None], np.ones(1))
    value = float(np.einsum("k,i,kij,j->", dist.weights, w, dist.atoms, w))
    return dist, value


def paired_cost(p, q, cost: str = "euclidean_norm", metric=None) -> float:
    """Cost of the coupling that moves atom i of ``p`` onto atom i of ``q``."""
    if p.atoms.shape != q.atoms.shape or not np.allclose(p.weights, q.weights, rtol=0, atol=1e-15):
        raise ValueError("paired coupling needs matching atoms and weights")
    ball = WassersteinBall(0.0, cost, metric)
    return float(p.weights @ ball.ground_cost(p.atoms, q.atoms))


def _cost_matrix(p, q, ball: WassersteinBall) -> np.ndarray:
    if p.atoms.shape[1:] != q.atoms.shape[1:]:
        raise ValueError(f"atom shapes differ: {p.atoms.shape[1:]} vs {q.atoms.shape[1:]}")
    return ball.ground_cost(p.atoms[:, None], q.atoms[None, :])


def _assignment_cost(C: np.ndarray) -> float:
    k = C.shape[0]
    if k <= _EXHAUSTIVE_MAX:
        perms = np.array(list(itertools.permutations(range(k))))
        totals = C[np.arange(k), perms].sum(axis=1)
        return float(totals.min()) / k
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].sum()) / k


def _transport_lp(C: np.ndarray, p_w: np.ndarray, q_w: np.ndarray) -> float:
    m, n = C.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(
        C.ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([p_w, q_w]),
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def wasserstein1_discrete(p, q, cost: str = "euclidean_norm", metric=None) -> float:
    """Exact optimal transport cost between two discrete distributions.

    Equal-size uniform supports are solved as an assignment problem
    (exhaustively up to 8 atoms); anything else as a transport LP.
    """
    ball = WassersteinBall(0.0, cost, metric)
    C = _cost_matrix(p, q, ball)
    if C.shape[0] == C.shape[1] and p.is_uniform() and q.is_uniform():
        return _assignment_cost(C)
    return _transport_lp(C, p.weights, q.weights)


def kantorovich_check(w, nominal: SteeringSampleSet, trial: DiscreteDistribution, epsilon: float,
                      tol: float = 1e-8) -> OracleVerdict:
    """Verdict on ``E_trial[-w^T a] <= eps ||w|| - w^T a_bar`` for an in-ball trial."""
    w = _nonzero(w)
    distance = wasserstein1_discrete(trial, DiscreteDistribution.empirical(nominal))
    if distance > epsilon + 1e-9:
        raise ValueError(f"trial distribution lies outside the ball: W1={distance:.6g} > eps={epsilon:.6g}")
    lhs = _expected_loss(trial, w)
    rhs = epsilon * np.linalg.norm(w) - w @ nominal.mean
    return OracleVerdict.compare(lhs, rhs, f"kantorovich dominance (W1={distance:.3g}, eps={epsilon:.3g})", tol)


def mismatch_bound_check(a_actual, samples: SteeringSampleSet, epsilon: float, tol: float = 1e-10) -> OracleVerdict:
    gap = np.linalg.norm(np.asarray(a_actual, dtype=float) - samples.mean)
    return OracleVerdict.compare(gap, epsilon, "steering mismatch ||a_actual - a_bar|| <= eps", tol)


def random_in_ball(samples: SteeringSampleSet, epsilon: float, rng: np.random.Generator,
                   split: bool = False) -> DiscreteDistribution:
    """A random distribution whose explicit coupling to the samples costs at most ``eps``.

    Each atom moves along a random direction; with ``split`` each atom is
    divided into two pieces that move independently.
    """
    atoms = samples.samples
    m, d = atoms.shape
    pieces = 2 if split else 1
    source = np.repeat(atoms, pieces, axis=0)
    if split:
        frac = rng.uniform(0.05, 0.95, m)
        weights = np.column_stack([frac, 1.0 - frac]).ravel() / m
    else:
        weights = np.full(m, 1.0 / m)
    directions = rng.standard_normal((m * pieces, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    lengths = rng.exponential(size=m * pieces)
    budget = epsilon * rng.uniform(0.0, 1.0)
    spent = weights @ lengths
    lengths *= budget / spent if spent > 0 else 0.0
    return DiscreteDistribution(source + lengths[:, None] * directions, weights)


def chance_probability_mc(w, mean, cov, trials: int, seed: int, block: int = MC_BLOCK) -> float:
    """Monte Carlo estimate of ``P(w^T a >= 1)`` for ``a ~ N(mean, cov)``.

    Draws come in fixed-size blocks, block ``i`` from its own substream of
    ``seed``, so any partition of blocks across workers gives the same count.
    """
    if trials < 10_000:
        raise ValueError("use at least 10^4 trials")
    w = np.asarray(w, dtype=float).ravel()
    mean = np.asarray(mean, dtype=float).ravel()
    chol = np.linalg.cholesky(np.asarray(cov, dtype=float))
    hits = 0
    n_blocks = -(-trials // block)
    for i in range(n_blocks):
        size = min(block, trials - i * block)
        hits += chance_hits_block(w, mean, chol, seed, i, size)
    return hits / trials


def chance_hits_block(w, mean, chol, seed: int, block_index: int, size: int) -> int:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block_index,)))
    draws = mean + rng.standard_normal((size, mean.size)) @ chol.T
    return int(np.count_nonzero(draws @ w >= 1.0))
