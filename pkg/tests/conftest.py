import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def random_image(rng, h, w):
    return rng.integers(0, 256, size=(h, w)).astype(np.float64)
