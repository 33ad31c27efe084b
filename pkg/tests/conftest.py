import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dqma.fingerprint import make_family
from dqma.protocols import eq_protocol, toy_eq_protocol

settings.register_profile(
    "dqma", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("dqma")


@pytest.fixture(scope="session")
def pi4():
    return eq_protocol(make_family(4))


@pytest.fixture(scope="session")
def toy():
    return toy_eq_protocol()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
