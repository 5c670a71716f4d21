"""Narrowband array signal model on a uniform linear array.

Complex snapshots are generated as ``x(t) = s(t) a + i(t) + n(t)`` with all
components drawn as zero-mean circular complex Gaussians. Beamformer design
works on the real-valued lifting of the complex quantities::

    v_r = [Re v; Im v]          R_r = [[Re R, -Im R], [Im R, Re R]]

which preserves ``Re{w^H a} = w_r^T a_r`` and ``w^H R w = w_r^T R_r w_r``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
NULL_FLOOR_DB = -120.0

PERTURBATION_KINDS = ("none", "gaussian_additive", "doa_jitter")


def _rng(rng_stream) -> np.random.Generator:
    if isinstance(rng_stream, np.random.Generator):
        return rng_stream
    return np.random.default_rng(rng_stream)


@dataclass(frozen=True)
class ArrayGeometry:
    n_sensors: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 1:
            raise ValueError(f"n_sensors must be a positive integer, got {self.n_sensors}")
        if not self.spacing_wavelengths > 0:
            raise ValueError("spacing_wavelengths must be positive")


@dataclass(frozen=True)
class SourceSpec:
    doa_deg: float
    power: float
    kind: str = "desired"

    def __post_init__(self):
        if not -90.0 < self.doa_deg < 90.0:
            raise ValueError(f"doa_deg must lie in (-90, 90), got {self.doa_deg}")
        if self.power < 0:
            raise ValueError("source power must be nonnegative")
        if self.kind not in ("desired", "interferer"):
            raise ValueError(f"unknown source kind {self.kind!r}")


@dataclass(frozen=True)
class PerturbationModel:
    """How steering-vector samples scatter around the presumed direction.

    ``scale`` is a per-real-component standard deviation for
    ``gaussian_additive`` and a DOA standard deviation in degrees for
    ``doa_jitter``; it is ignored for ``none``.
    """

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("perturbation scale must be nonnegative")


@dataclass(frozen=True)
class Scenario:
    """One desired source, a set of interferers and white sensor noise.

    ``presumed_doa_deg`` is the direction the designer believes the desired
    source comes from; steering samples are drawn around it. ``None`` means
    no pointing error.
    """

    geometry: ArrayGeometry
    desired: SourceSpec
    interferers: tuple[SourceSpec, ...] = ()
    noise_power: float = 1.0
    steering_perturbation: PerturbationModel = field(default_factory=PerturbationModel)
    seed: int = 0
    presumed_doa_deg: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "interferers", tuple(self.interferers))
        if self.desired.kind != "desired":
            raise ValueError("the desired source must have kind 'desired'")
        if any(src.kind != "interferer" for src in self.interferers):
            raise ValueError("interferers must have kind 'interferer'")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if self.presumed_doa_deg is not None and not -90.0 < self.presumed_doa_deg < 90.0:
            raise ValueError("presumed_doa_deg must lie in (-90, 90)")

    @property
    def presumed_doa(self) -> float:
        if self.presumed_doa_deg is None:
            return self.desired.doa_deg
        return self.presumed_doa_deg

    def actual_steering(self) -> np.ndarray:
        return steering_vector(self.geometry, self.desired.doa_deg)

    def presumed_steering(self) -> np.ndarray:
        return steering_vector(self.geometry, self.presumed_doa)

    def interference_plus_noise_covariance(self) -> np.ndarray:
        """Exact INC matrix ``sum_k p_k a_k a_k^H + sigma_n^2 I``."""
        n = self.geometry.n_sensors
        r = self.noise_power * np.eye(n, dtype=complex)
        for src in self.interferers:
            a = steering_vector(self.geometry, src.doa_deg)
            r += src.power * np.outer(a, a.conj())
        return r

    def optimal_sinr(self) -> float:
        """``sigma_s^2 a^H R_in^{-1} a``, the SINR of the clairvoyant beamformer."""
        a = self.actual_steering()
        r_in = self.interference_plus_noise_covariance()
        return float(self.desired.power * np.real(a.conj() @ np.linalg.solve(r_in, a)))

    def to_dict(self) -> dict:
        out = {
            "n_sensors": self.geometry.n_sensors,
            "spacing_wavelengths": self.geometry.spacing_wavelengths,
            "desired": {"doa_deg": self.desired.doa_deg, "power": self.desired.power},
            "interferers": [
                {"doa_deg": s.doa_deg, "power": s.power} for s in self.interferers
            ],
            "noise_power": self.noise_power,
            "perturbation": {
                "kind": self.steering_perturbation.kind,
                "scale": self.steering_perturbation.scale,
            },
            "seed": self.seed,
        }
        if self.presumed_doa_deg is not None:
            out["presumed_doa_deg"] = self.presumed_doa_deg
        return out


@dataclass(frozen=True)
class SnapshotBatch:
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise ValueError("samples must be an N x T matrix with T >= 1")

    @property
    def t_count(self) -> int:
        return self.samples.shape[1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "sensor_index", "re", "im"])
            for t in range(self.t_count):
                for n, value in enumerate(self.samples[:, t]):
                    writer.writerow([t, n, repr(float(value.real)), repr(float(value.imag))])


@dataclass(frozen=True)
class SteeringSampleSet:
    """Lifted steering samples defining the empirical nominal distribution.

    ``samples`` is an ``M x 2N`` array, one lifted sample per row.
    """

    samples: np.ndarray
    mean: np.ndarray = field(init=False)

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if samples.shape[0] < 1 or samples.shape[1] % 2:
            raise ValueError("need M >= 1 samples of even length 2N")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "mean", samples.mean(axis=0))

    @property
    def m_count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def steering_vector(geometry: ArrayGeometry, doa_deg: float) -> np.ndarray:
    """ULA response ``exp(j 2 pi d n sin(theta))`` referenced to element 0."""
    if not abs(doa_deg) < 90.0:
        raise ValueError(f"|doa_deg| must be below 90 degrees, got {doa_deg}")
    n = np.arange(geometry.n_sensors)
    phase = 2.0 * np.pi * geometry.spacing_wavelengths * n * np.sin(np.deg2rad(doa_deg))
    return np.exp(1j * phase)


def _circular_gaussian(rng: np.random.Generator, power: float, shape) -> np.ndarray:
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_snapshots(scenario: Scenario, t_count: int, rng_stream=None) -> SnapshotBatch:
    """Draw ``t_count`` array snapshots; ``rng_stream`` defaults to the scenario seed."""
    if t_count < 1:
        raise ValueError("t_count must be at least 1")
    rng = _rng(scenario.seed if rng_stream is None else rng_stream)
    n = scenario.geometry.n_sensors
    # fixed draw order: desired, interferers, noise
    s = _circular_gaussian(rng, scenario.desired.power, t_count)
    x = np.outer(scenario.actual_steering(), s)
    for src in scenario.interferers:
        i_k = _circular_gaussian(rng, src.power, t_count)
        x += np.outer(steering_vector(scenario.geometry, src.doa_deg), i_k)
    x += _circular_gaussian(rng, scenario.noise_power, (n, t_count))
    return SnapshotBatch(x)


def sample_covariance(batch: SnapshotBatch) -> np.ndarray:
    x = batch.samples
    r = x @ x.conj().T / batch.t_count
    # exact Hermitian symmetry despite rounding in the product
    return 0.5 * (r + r.conj().T)


def lift_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.concatenate([v.real, v.imag])


def unlift_vector(v_r) -> np.ndarray:
    v_r = np.asarray(v_r, dtype=float).ravel()
    if v_r.size % 2:
        raise ValueError("lifted vectors have even length")
    n = v_r.size // 2
    return v_r[:n] + 1j * v_r[n:]


def is_hermitian(r: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return r.ndim == 2 and r.shape[0] == r.shape[1] and np.max(np.abs(r - r.conj().T)) <= tol


def lift_matrix(r) -> np.ndarray:
    r = np.atleast_2d(np.asarray(r, dtype=complex))
    if not is_hermitian(r):
        raise ValueError("lift_matrix expects a Hermitian matrix")
    return np.block([[r.real, -r.imag], [r.imag, r.real]])


def check_lifted_matrix(r_r: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    """Raise ValueError unless ``r_r`` is a valid lifted Hermitian PSD matrix."""
    r_r = np.asarray(r_r, dtype=float)
    if r_r.ndim != 2 or r_r.shape[0] != r_r.shape[1] or r_r.shape[0] % 2:
        raise ValueError("lifted matrix must be square with even size")
    if np.max(np.abs(r_r - r_r.T)) > tol:
        raise ValueError("lifted matrix is not symmetric")
    n = r_r.shape[0] // 2
    a, b = r_r[:n, :n], r_r[n:, :n]
    if np.max(np.abs(r_r[n:, n:] - a)) > tol or np.max(np.abs(r_r[:n, n:] + b)) > tol:
        raise ValueError("lifted matrix lacks the [[A, -B], [B, A]] block structure")
    if np.linalg.eigvalsh(r_r).min() < -tol:
        raise ValueError("lifted matrix is not positive semidefinite")


def sinr(w, a_actual, sigma_s2: float, r_in_true) -> float:
    """Output SINR ``sigma_s^2 |w^H a|^2 / (w^H R_in w)`` as a linear ratio."""
    w = np.asarray(w, dtype=complex).ravel()
    if not np.any(w):
        raise ValueError("weight vector must be nonzero")
    a = np.asarray(a_actual, dtype=complex).ravel()
    gain = np.abs(np.vdot(w, a)) ** 2
    power = np.real(np.vdot(w, np.asarray(r_in_true) @ w))
    return float(sigma_s2 * gain / power)


def generate_steering_samples(scenario: Scenario, m_count: int, rng_stream=None) -> SteeringSampleSet:
    if m_count < 1:
        raise ValueError("m_count must be at least 1")
    rng = _rng(scenario.seed if rng_stream is None else rng_stream)
    geometry = scenario.geometry
    model = scenario.steering_perturbation
    a0 = scenario.presumed_steering()
    if model.kind == "none" or model.scale == 0:
        a = np.tile(a0, (m_count, 1))
    elif model.kind == "gaussian_additive":
        noise = rng.standard_normal((m_count, geometry.n_sensors)) + 1j * rng.standard_normal(
            (m_count, geometry.n_sensors)
        )
        a = a0 + model.scale * noise
    else:
        doas = scenario.presumed_doa + model.scale * rng.standard_normal(m_count)
        # keep jittered directions inside the visible region
        doas = np.clip(doas, -89.999, 89.999)
        a = np.array([steering_vector(geometry, d) for d in doas])
    return SteeringSampleSet(np.hstack([a.real, a.imag]))


def beampattern(w, geometry: ArrayGeometry, grid_deg: Sequence[float]):
    """Normalized power pattern ``20 log10 |w^H a(theta)|`` over ``grid_deg``.

    Returns ``(angles, power_db)`` with the grid maximum at 0 dB and nulls
    clamped to -120 dB.
    """
    w = np.asarray(w, dtype=complex).ravel()
    if not np.any(w):
        raise ValueError("weight vector must be nonzero")
    angles = np.asarray(grid_deg, dtype=float).ravel()
    if angles.size == 0:
        raise ValueError("beampattern grid is empty")
    steering = np.array([steering_vector(geometry, t) for t in angles])
    response = np.abs(steering @ w.conj())
    peak = response.max()
    if peak == 0:
        return angles, np.full(angles.size, NULL_FLOOR_DB)
    with np.errstate(divide="ignore"):
        power_db = 20.0 * np.log10(response / peak)
    return angles, np.maximum(power_db, NULL_FLOOR_DB)
