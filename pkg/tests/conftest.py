import numpy as np
import pytest

from lib.denoiser import MixtureSpec
from lib.schedule import NoiseSchedule, make_linear_beta_schedule


@pytest.fixture(scope="session")
def schedule() -> NoiseSchedule:
    return make_linear_beta_schedule(1000)


@pytest.fixture(scope="session")
def small_schedule() -> NoiseSchedule:
    return make_linear_beta_schedule(10, 1e-2, 0.2)


@pytest.fixture(scope="session")
def mixture() -> MixtureSpec:
    return MixtureSpec(
        weights=np.array([0.3, 0.3, 0.4]),
        means=np.array([[-1.5, -1.0], [1.5, -1.0], [0.0, 1.6]]),
        component_std=0.3,
    )


@pytest.fixture(scope="session")
def gaussian() -> MixtureSpec:
    return MixtureSpec(weights=np.array([1.0]), means=np.array([[0.5, -0.3]]), component_std=0.4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def explicit_schedule(*alphas: float) -> NoiseSchedule:
    """Schedule with the given alpha_1..alpha_T."""
    return NoiseSchedule(alphas=np.array([1.0, *alphas]))
