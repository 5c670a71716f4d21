import numpy as np
import pytest

from wassbeam.scenario import ArrayGeometry, Scenario, SourceSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_scenario():
    return Scenario(
        geometry=ArrayGeometry(4),
        desired=SourceSpec(0.0, 10.0),
        interferers=(SourceSpec(40.0, 100.0, "interferer"),),
        noise_power=1.0,
        seed=3,
        presumed_doa_deg=3.0,
    )


def random_hermitian_psd(rng, n, floor=0.0):
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return c @ c.conj().T / n + floor * np.eye(n)
