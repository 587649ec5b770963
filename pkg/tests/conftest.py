import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "sgalab",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("sgalab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ball(rng, n, radius):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v) * radius * rng.random() ** (1.0 / n)
