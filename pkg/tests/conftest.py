import numpy as np
import pytest

from mfg_exit.analytic import exponential_problem, interval_problem
from mfg_exit.grid import build_grid
from mfg_exit.models import ExpressionSpec

SINE_V = ExpressionSpec(kind="sine", params={"amplitude": 1.0, "frequency": 1.0})
HALF_SINE_V = ExpressionSpec(kind="sine", params={"amplitude": 0.5, "frequency": 1.0})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def zero_flux_problem():
    """j0 = 0 with a potential that changes sign at x = 1/2."""
    return interval_problem(SINE_V, 0.0)


@pytest.fixture
def positive_flux_problem():
    """j0 = 1 with V above the flux threshold everywhere."""
    return interval_problem(HALF_SINE_V, 1.0)


@pytest.fixture
def square_problem():
    return exponential_problem()


@pytest.fixture
def line32():
    return build_grid((0.0, 1.0), 32)


@pytest.fixture
def square16():
    return build_grid([(0.0, 1.0), (0.0, 1.0)], 16)
