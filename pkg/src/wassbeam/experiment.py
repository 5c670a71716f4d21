"""Experiment configuration, single-instance designs and Monte Carlo sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import designs
from .designs import InfeasibleRadius, SolverFailure
from .scenario import (
    ArrayGeometry,
    PerturbationModel,
    Scenario,
    SourceSpec,
    generate_snapshots,
    generate_steering_samples,
    lift_matrix,
    lift_vector,
    sample_covariance,
    sinr,
)

SWEEP_VARIABLES = ("snr_db", "snapshots", "epsilon", "mismatch_deg")
CSV_HEADER = ("axis", "method", "mean_sinr_db", "std_sinr_db", "mean_objective", "infeasible_count")
LAMBDA_POLICIES = ("inverse_sample_covariance", "identity", "inverse_steering_covariance")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    """``epsilon`` is a number or ``"mismatch_bound"`` (oracle-tuned radius)."""

    name: str
    label: str
    epsilon: float | str | None = None
    rho: float | None = None
    beta: float | None = None
    lambda_policy: str = "inverse_sample_covariance"
    epsilon_margin: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    methods: tuple[MethodSpec, ...]
    snapshots: int = 30
    steering_samples: int = 1
    trials: int = 1
    sweep: SweepSpec | None = None
    output_dir: Path = field(default_factory=lambda: Path("out"))
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.snapshots < 1 or self.steering_samples < 1:
            raise ConfigError("snapshots and steering_samples must be positive")
        if not self.methods:
            raise ConfigError("at least one method is required")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"method labels must be unique: {labels}")


def _power(entry: dict, noise_power: float, db_key: str) -> float:
    if "power" in entry:
        return float(entry["power"])
    if db_key in entry:
        return noise_power * 10.0 ** (float(entry[db_key]) / 10.0)
    raise ConfigError(f"source needs 'power' or '{db_key}'")


def scenario_from_dict(doc: dict, seed: int = 0) -> Scenario:
    noise = float(doc.get("noise_power", 1.0))
    desired = doc.get("desired", {"doa_deg": 0.0, "snr_db": 10.0})
    d_doa = float(desired.get("doa_deg", 0.0))
    pert = doc.get("perturbation", {})
    presumed = doc.get("presumed_doa_deg")
    if presumed is None and "mismatch_deg" in doc:
        presumed = d_doa + float(doc["mismatch_deg"])
    return Scenario(
        geometry=ArrayGeometry(int(doc.get("n_sensors", 10)), float(doc.get("spacing_wavelengths", 0.5))),
        desired=SourceSpec(d_doa, _power(desired, noise, "snr_db"), "desired"),
        interferers=tuple(
            SourceSpec(float(i["doa_deg"]), _power(i, noise, "inr_db"), "interferer")
            for i in doc.get("interferers", [{"doa_deg": 30.0, "inr_db": 30.0}])
        ),
        noise_power=noise,
        steering_perturbation=PerturbationModel(str(pert.get("kind", "none")), float(pert.get("scale", 0.0))),
        seed=seed,
        presumed_doa_deg=None if presumed is None else float(presumed),
    )


def _method_from_dict(entry: dict) -> MethodSpec:
    name = entry.get("name")
    if name not in designs.METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {designs.METHODS}")
    eps = entry.get("epsilon")
    if isinstance(eps, str) and eps != "mismatch_bound":
        raise ConfigError(f"epsilon must be a number or 'mismatch_bound', got {eps!r}")
    policy = entry.get("lambda", "inverse_sample_covariance")
    if policy not in LAMBDA_POLICIES:
        raise ConfigError(f"unknown lambda policy {policy!r}")
    if name in ("wdro_norm", "wdro_joint") and eps is None:
        raise ConfigError(f"method {name} needs 'epsilon'")
    if name == "wdro_mahalanobis" and eps is None and entry.get("beta") is None:
        raise ConfigError("wdro_mahalanobis needs 'epsilon' or 'beta'")
    if name in ("diag_load", "wdro_joint") and entry.get("rho") is None:
        raise ConfigError(f"method {name} needs 'rho'")
    return MethodSpec(
        name=name,
        label=str(entry.get("label", name)),
        epsilon=eps if eps is None or isinstance(eps, str) else float(eps),
        rho=None if entry.get("rho") is None else float(entry["rho"]),
        beta=None if entry.get("beta") is None else float(entry["beta"]),
        lambda_policy=policy,
        epsilon_margin=float(entry.get("epsilon_margin", 1.0)),
    )


def config_from_dict(doc: dict) -> ExperimentConfig:
    seed = int(doc.get("seed", 0))
    if seed < 0:
        raise ConfigError("seed must be unsigned")
    sweep = None
    if "sweep" in doc:
        s = doc["sweep"]
        if s.get("variable") not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        values = tuple(s.get("values", ()))
        if not values:
            raise ConfigError("sweep grid must be nonempty")
        sweep = SweepSpec(s["variable"], values)
    try:
        return ExperimentConfig(
            scenario=scenario_from_dict(doc.get("scenario", {}), seed),
            methods=tuple(_method_from_dict(m) for m in doc.get("methods", [])),
            snapshots=int(doc.get("snapshots", 30)),
            steering_samples=int(doc.get("steering_samples", 1)),
            trials=int(doc.get("trials", 1)),
            sweep=sweep,
            output_dir=Path(doc.get("output_dir", "out")),
            seed=seed,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return config_from_dict(doc)


def _resolve_epsilon(spec: MethodSpec, scenario: Scenario, a_bar: np.ndarray) -> float | None:
    if spec.epsilon == "mismatch_bound":
        gap = np.linalg.norm(lift_vector(scenario.actual_steering()) - a_bar)
        return float(spec.epsilon_margin * gap)
    if spec.epsilon is None and spec.beta is not None:
        return designs.epsilon_from_beta(scenario.geometry.n_sensors, spec.beta)
    return spec.epsilon


def _lambda_matrix(spec: MethodSpec, R_r: np.ndarray, samples) -> np.ndarray:
    if spec.lambda_policy == "identity":
        return np.eye(R_r.shape[0])
    if spec.lambda_policy == "inverse_steering_covariance":
        if samples.m_count < 2:
            raise ValueError("steering covariance needs at least two samples")
        cov = np.cov(samples.samples, rowvar=False)
        cov += 1e-9 * np.trace(cov) / cov.shape[0] * np.eye(cov.shape[0]) + 1e-12 * np.eye(cov.shape[0])
        inv = np.linalg.inv(cov)
        return 0.5 * (inv + inv.T)
    return designs.default_lambda(R_r)


def run_method(spec: MethodSpec, scenario: Scenario, R_r: np.ndarray, samples):
    """Design one beamformer; returns (design or None, status string)."""
    a_bar = samples.mean
    eps = _resolve_epsilon(spec, scenario, a_bar)
    try:
        if spec.name == "mvdr_smi":
            d = designs.design_mvdr_smi(R_r, samples)
        elif spec.name == "wdro_norm":
            d = designs.design_wdro_norm(R_r, samples, eps)
        elif spec.name == "wdro_mahalanobis":
            d = designs.design_wdro_mahalanobis(
                R_r, samples, eps, _lambda_matrix(spec, R_r, samples), beta=spec.beta
            )
        elif spec.name == "diag_load":
            d = designs.design_diag_load(R_r, samples, spec.rho)
        else:
            d = designs.design_wdro_joint(R_r, samples, eps, spec.rho)
    except InfeasibleRadius:
        return None, "infeasible_radius"
    except SolverFailure:
        return None, "solver_failure"
    return d, "optimal"


def _design_entry(spec: MethodSpec, scenario: Scenario, R_r, samples) -> dict:
    d, status = run_method(spec, scenario, R_r, samples)
    entry = {
        "label": spec.label,
        "method": spec.name,
        "status": status,
        "epsilon": _resolve_epsilon(spec, scenario, samples.mean),
        "rho": spec.rho,
        "beta": spec.beta,
    }
    if d is None:
        return entry
    w = d.weights_complex
    entry.update(d.to_dict())
    entry["label"] = spec.label
    entry["status"] = status
    entry["distortionless"] = float(d.weights_lifted @ samples.mean)
    entry["certificate"] = (
        designs.certificate_of_robustness(d)
        if d.method in ("wdro_norm", "wdro_mahalanobis", "wdro_joint")
        else None
    )
    entry["sinr_db"] = 10.0 * math.log10(
        sinr(w, scenario.actual_steering(), scenario.desired.power, scenario.interference_plus_noise_covariance())
    )
    return entry


def _trial_streams(seed: int, axis_index: int, trial_index: int):
    root = np.random.SeedSequence(seed, spawn_key=(axis_index, trial_index))
    snap, steer = root.spawn(2)
    return np.random.default_rng(snap), np.random.default_rng(steer)


def run_design(config: ExperimentConfig) -> dict:
    """One scenario instance: snapshots, sample covariance, every method."""
    scenario = config.scenario
    snap_rng, steer_rng = _trial_streams(config.seed, 0, 0)
    batch = generate_snapshots(scenario, config.snapshots, snap_rng)
    R_r = lift_matrix(sample_covariance(batch))
    samples = generate_steering_samples(scenario, config.steering_samples, steer_rng)
    a_bar = samples.mean
    n = scenario.geometry.n_sensors
    return {
        "seed": config.seed,
        "snapshots": config.snapshots,
        "steering_samples": config.steering_samples,
        "scenario": scenario.to_dict(),
        "a_bar": {"re": [float(v) for v in a_bar[:n]], "im": [float(v) for v in a_bar[n:]]},
        "optimal_sinr_db": 10.0 * math.log10(scenario.optimal_sinr()),
        "methods": [_design_entry(spec, scenario, R_r, samples) for spec in config.methods],
    }


def _apply_axis(config: ExperimentConfig, value) -> tuple[ExperimentConfig, tuple[MethodSpec, ...]]:
    scenario = config.scenario
    variable = config.sweep.variable
    methods = config.methods
    if variable == "snr_db":
        desired = replace(scenario.desired, power=scenario.noise_power * 10.0 ** (float(value) / 10.0))
        config = replace(config, scenario=replace(scenario, desired=desired))
    elif variable == "snapshots":
        config = replace(config, snapshots=int(value))
    elif variable == "mismatch_deg":
        presumed = scenario.desired.doa_deg + float(value)
        config = replace(config, scenario=replace(scenario, presumed_doa_deg=presumed))
    else:
        methods = tuple(
            replace(m, epsilon=float(value)) if m.name in ("wdro_norm", "wdro_mahalanobis", "wdro_joint") else m
            for m in methods
        )
    return config, methods


def _run_trial(args):
    config, methods, axis_index, trial_index = args
    scenario = config.scenario
    snap_rng, steer_rng = _trial_streams(config.seed, axis_index, trial_index)
    batch = generate_snapshots(scenario, config.snapshots, snap_rng)
    R_r = lift_matrix(sample_covariance(batch))
    samples = generate_steering_samples(scenario, config.steering_samples, steer_rng)
    a = scenario.actual_steering()
    r_in = scenario.interference_plus_noise_covariance()
    out = []
    for spec in methods:
        d, _ = run_method(spec, scenario, R_r, samples)
        if d is None:
            out.append(None)
        else:
            s = sinr(d.weights_complex, a, scenario.desired.power, r_in)
            out.append((10.0 * math.log10(s), d.objective))
    return out


def _aggregate(values: list) -> tuple[float, float, float, int]:
    ok = [v for v in values if v is not None]
    infeasible = len(values) - len(ok)
    if not ok:
        return math.nan, math.nan, math.nan, infeasible
    # fsum is exact, hence independent of trial order
    sinrs = [v[0] for v in ok]
    mean = math.fsum(sinrs) / len(ok)
    std = math.sqrt(math.fsum((s - mean) ** 2 for s in sinrs) / len(ok))
    objective = math.fsum(v[1] for v in ok) / len(ok)
    return mean, std, objective, infeasible


def run_sweep(config: ExperimentConfig, workers: int = 1, trial_order=None) -> list[tuple]:
    """Rows ``(axis, method, mean_sinr_db, std_sinr_db, mean_objective, infeasible_count)``.

    ``trial_order`` permutes the execution order of trials; results are
    stored by trial index, so aggregates do not depend on it.
    """
    if config.sweep is None:
        raise ConfigError("sweep command needs a [sweep] table")
    rows = []
    order = list(range(config.trials)) if trial_order is None else list(trial_order)
    if sorted(order) != list(range(config.trials)):
        raise ValueError("trial_order must be a permutation of the trial indices")
    for axis_index, value in enumerate(config.sweep.values):
        point, methods = _apply_axis(config, value)
        tasks = [(point, methods, axis_index, t) for t in order]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_trial, tasks, chunksize=8))
        else:
            results = [_run_trial(task) for task in tasks]
        by_trial = dict(zip(order, results))
        for k, spec in enumerate(methods):
            per_trial = [by_trial[t][k] for t in range(config.trials)]
            rows.append((value, spec.label, *_aggregate(per_trial)))
    return rows
