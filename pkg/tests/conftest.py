import math

import numpy as np
import pytest

from fermi_ulam.model import ModelParams


@pytest.fixture
def unit_params():
    return ModelParams(1.0, 2.0, 1.0)


@pytest.fixture
def ulam_params():
    return ModelParams(1 / math.sqrt(2), math.sqrt(2), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
