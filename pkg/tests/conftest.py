import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "convlab",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("convlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def seeded(*key):
    return np.random.default_rng(np.random.SeedSequence(list(key)))
