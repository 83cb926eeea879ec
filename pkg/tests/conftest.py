import numpy as np
import pytest

from bmb.rng import RngStream


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def gen():
    return np.random.default_rng(99)
