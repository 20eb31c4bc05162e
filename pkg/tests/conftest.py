import numpy as np
import pytest

from ddidro.core import SolverOptions


def close(a, b, tol=1e-6):
    """Relative-plus-absolute comparison used across the suite."""
    return abs(a - b) <= tol * (1.0 + max(abs(a), abs(b)))


@pytest.fixture
def opts():
    return SolverOptions()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
