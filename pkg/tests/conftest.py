import numpy as np
import pytest

from gamurn.gam import GamConfig, Schedule
from gamurn.weights import WeightScheme


@pytest.fixture
def power2():
    return WeightScheme.power(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def make_config(scheme, p, seed=0):
    return GamConfig(scheme, Schedule.constant(p), seed)
