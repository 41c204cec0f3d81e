import numpy as np
import pytest

from tuconform.weights import lognormal_weights


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


@pytest.fixture(scope="session")
def h11():
    """The simulation studies' step-budget weights."""
    return lognormal_weights(11.0, 1.0)
