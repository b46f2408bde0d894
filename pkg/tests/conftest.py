import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from noisestab.rbm import SimConfig

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def small_config():
    return SimConfig(n_paths=4000, dt=1e-3, seed=SimConfig.seed)


def within_se(estimate, exact, se, k=3.0):
    return abs(estimate - exact) <= k * se


@pytest.fixture
def rng_np():
    return np.random.default_rng(12345)
