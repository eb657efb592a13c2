import numpy as np
import pytest

from pxkacanov.mesh import structured_rectangle


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit8():
    return structured_rectangle(0.0, 0.0, 1.0, 1.0, 8)
