"""Oracle verification suite behind ``wassbeam verify``.

Every check returns an :class:`OracleVerdict`; the suite passes only if all
do. ``fast`` runs in a few seconds; ``full`` adds larger randomized runs and
the 10^5-draw chance-constraint Monte Carlo.
"""

from __future__ import annotations

import numpy as np

from . import designs
from .oracle import (
    DiscreteDistribution,
    OracleVerdict,
    chance_probability_mc,
    kantorovich_check,
    mismatch_bound_check,
    paired_cost,
    random_in_ball,
    wasserstein1_discrete,
    worst_case_inc_shift,
    worst_case_shift_mahalanobis,
    worst_case_shift_norm,
)
from .scenario import SteeringSampleSet, lift_matrix

LEVELS = ("fast", "full")


def random_instance(rng: np.random.Generator, n_sensors: int = 3, m_count: int = 4):
    """Random lifted covariance, steering samples, SPD metric and weights."""
    c = rng.standard_normal((n_sensors, n_sensors)) + 1j * rng.standard_normal((n_sensors, n_sensors))
    R_r = lift_matrix(c @ c.conj().T / n_sensors + 0.1 * np.eye(n_sensors))
    samples = SteeringSampleSet(rng.standard_normal((m_count, 2 * n_sensors)) + 1.0)
    x = rng.standard_normal((2 * n_sensors, 2 * n_sensors))
    metric = x @ x.T / (2 * n_sensors) + 0.2 * np.eye(2 * n_sensors)
    w = rng.standard_normal(2 * n_sensors)
    return R_r, samples, metric, w


def _identity(value: float, target: float, description: str, tol: float) -> OracleVerdict:
    return OracleVerdict.compare(abs(value - target), tol, description, 0.0)


def attainment_checks(rng, count: int) -> list[OracleVerdict]:
    out = []
    for k in range(count):
        R_r, samples, metric, w = random_instance(rng)
        eps = rng.uniform(0.0, 2.0)
        rho = rng.uniform(0.0, 2.0)
        dist, value = worst_case_shift_norm(samples, w, eps)
        out.append(_identity(value, eps * np.linalg.norm(w) - w @ samples.mean, f"norm attainment #{k}", 1e-10))
        moved = wasserstein1_discrete(dist, DiscreteDistribution.empirical(samples))
        out.append(_identity(moved, eps, f"norm transport budget #{k}", 1e-10))

        eps_q = eps + 1e-3
        dist, value = worst_case_shift_mahalanobis(samples, w, eps_q, metric)
        dual = np.sqrt(2 * eps_q) * np.linalg.norm(np.linalg.solve(designs.spd_sqrt(metric), w)) - w @ samples.mean
        out.append(_identity(value, dual, f"mahalanobis attainment #{k}", 1e-10))
        moved = wasserstein1_discrete(dist, DiscreteDistribution.empirical(samples), "mahalanobis", metric)
        out.append(_identity(moved, eps_q, f"mahalanobis transport budget #{k}", 1e-10))

        mdist, value = worst_case_inc_shift(R_r, w, rho)
        out.append(_identity(value, w @ R_r @ w + rho * (w @ w), f"inc attainment #{k}", 1e-10))
        out.append(_identity(np.linalg.norm(mdist.atoms[0] - R_r), rho, f"inc transport budget #{k}", 1e-10))
    return out


def dominance_checks(rng, instances: int, trials: int) -> list[OracleVerdict]:
    """Worst observed slack of the Kantorovich bound per instance."""
    out = []
    for k in range(instances):
        _, samples, _, w = random_instance(rng)
        eps = rng.uniform(0.05, 2.0)
        worst = None
        for t in range(trials):
            trial = random_in_ball(samples, eps, rng, split=(t % 10 == 9))
            v = kantorovich_check(w, samples, trial, eps)
            if worst is None or v.slack < worst.slack:
                worst = v
        out.append(OracleVerdict.compare(worst.lhs, worst.rhs, f"kantorovich dominance instance #{k}", 1e-8))
    return out


def mismatch_checks(rng, trials: int) -> list[OracleVerdict]:
    out = []
    _, samples, _, _ = random_instance(rng)
    eps = 0.7
    v = rng.standard_normal(samples.dim)
    v *= eps / np.linalg.norm(v)
    out.append(mismatch_bound_check(samples.mean + v, samples, eps))
    for _ in range(trials):
        p = random_in_ball(samples, eps, rng)
        out.append(mismatch_bound_check(p.mean(), samples, eps))
    return out


def design_checks(rng, count: int) -> list[OracleVerdict]:
    out = []
    for k in range(count):
        R_r, samples, metric, _ = random_instance(rng)
        a_norm = np.linalg.norm(samples.mean)
        eps = rng.uniform(0.05, 0.9) * a_norm
        d = designs.design_wdro_norm(R_r, samples, eps)
        w = d.weights_lifted
        out.append(_identity(eps * np.linalg.norm(w), w @ samples.mean - 1, f"constraint activity #{k}", 1e-8))
        out.append(_identity(d.multiplier, designs.certificate_of_robustness(d), f"norm certificate #{k}", 1e-6))

        eps_q = 0.5 * eps**2
        dq = designs.design_wdro_mahalanobis(R_r, samples, eps_q, np.eye(R_r.shape[0]))
        out.append(_identity(np.max(np.abs(dq.weights_lifted - w)), 0.0, f"identity-metric reduction #{k}", 1e-8))

        eps_m = rng.uniform(0.05, 0.9) * 0.5 * (samples.mean @ metric @ samples.mean)
        dm = designs.design_wdro_mahalanobis(R_r, samples, eps_m, metric)
        out.append(_identity(dm.multiplier, designs.certificate_of_robustness(dm), f"quadratic certificate #{k}", 1e-6))

        rho = rng.uniform(0.0, 1.0)
        dj = designs.design_wdro_joint(R_r, samples, 0.0, rho)
        dl = designs.design_diag_load(R_r, samples, rho)
        out.append(_identity(np.max(np.abs(dj.weights_lifted - dl.weights_lifted)), 0.0, f"loading equivalence #{k}", 1e-10))

        # weak duality against random feasible points
        best = np.inf
        for _ in range(200):
            x = rng.standard_normal(w.size)
            gap = x @ samples.mean - eps * np.linalg.norm(x)
            if gap > 0:
                x *= 1.0 / gap
                best = min(best, x @ R_r @ x)
        if np.isfinite(best):
            out.append(OracleVerdict.compare(d.objective, best + 1e-8 * (1 + best), f"weak duality #{k}", 0.0))
    return out


def chance_checks(trials: int, seed: int = 2024) -> list[OracleVerdict]:
    rng = np.random.default_rng(seed)
    n_sensors, beta = 3, 0.9
    dim = 2 * n_sensors
    x = rng.standard_normal((dim, dim))
    cov = 0.05 * (x @ x.T / dim + 0.5 * np.eye(dim))
    mean = np.concatenate([np.ones(n_sensors), np.zeros(n_sensors)])
    draws = rng.multivariate_normal(mean, cov, size=200)
    samples = SteeringSampleSet(draws)
    R_r, _, _, _ = random_instance(rng, n_sensors)
    eps = designs.epsilon_from_beta(n_sensors, beta)
    d = designs.design_wdro_mahalanobis(R_r, samples, eps, np.linalg.inv(cov), beta=beta)
    p = chance_probability_mc(d.weights_lifted, mean, cov, trials, seed)
    return [OracleVerdict.compare(beta - 0.01, p, f"chance constraint P(w^T a >= 1) >= beta ({trials} draws)", 0.0)]


def run_suite(level: str = "fast", seed: int = 0) -> list[OracleVerdict]:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    rng = np.random.default_rng(seed)
    full = level == "full"
    verdicts = []
    verdicts += attainment_checks(rng, 100)
    verdicts += dominance_checks(rng, 20, 1000 if full else 50)
    verdicts += mismatch_checks(rng, 500 if full else 50)
    verdicts += design_checks(rng, 100 if full else 20)
    verdicts += chance_checks(100_000 if full else 10_000)
    # paired coupling of the nominal with itself must cost nothing
    _, samples, _, _ = random_instance(rng)
    nominal = DiscreteDistribution.empirical(samples)
    verdicts.append(_identity(paired_cost(nominal, nominal), 0.0, "zero self-transport", 1e-15))
    return verdicts
