import numpy as np
import pytest

from critnls.construct import construct_Q
from critnls.functionals import wave_at
from critnls.profiles import Nonlinearity, make_reference_grid


@pytest.fixture(scope="session")
def p4():
    return Nonlinearity.pure_power(4)


@pytest.fixture(scope="session")
def ref_grid():
    return make_reference_grid()


@pytest.fixture(scope="session")
def wave_001(p4):
    return construct_Q(0.01, p4)


@pytest.fixture(scope="session")
def wave_0001(p4):
    return construct_Q(0.001, p4)


@pytest.fixture(scope="session")
def wave_005(p4):
    return wave_at(0.05, p4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
