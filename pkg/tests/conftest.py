import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tissf.systems import double_integrator, truck_ccc

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def di():
    return double_integrator()


@pytest.fixture(scope="session")
def truck():
    return truck_ccc()


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)
