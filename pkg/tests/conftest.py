import warnings

import numpy as np
import pytest

from apspec import APSymbol, BaseSymbol, CoefficientFn, FrequencyModule


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture(scope="session")
def base_1d():
    return BaseSymbol.isotropic_quadratic(1)


@pytest.fixture(scope="session")
def base_2d():
    return BaseSymbol.isotropic_quadratic(2)


@pytest.fixture(scope="session")
def mod_1d():
    return FrequencyModule([[1.0]], [(1,)])


@pytest.fixture(scope="session")
def mathieu(mod_1d):
    """2 cos(x) perturbation over the unit integer lattice."""
    return APSymbol(mod_1d, {
        mod_1d.frequency((1,)): CoefficientFn.constant(1.0),
        mod_1d.frequency((-1,)): CoefficientFn.constant(1.0),
    }, hermitian=True)


@pytest.fixture(scope="session")
def mod_2d():
    return FrequencyModule([[1.0, 0.0], [0.0, 1.0]], [(1, 0), (0, 1)])


@pytest.fixture(scope="session")
def cosines_2d(mod_2d):
    """2 cos(x1) + 2 cos(x2) over the square lattice."""
    return APSymbol(mod_2d, {
        mod_2d.frequency(c): CoefficientFn.constant(1.0)
        for c in [(1, 0), (-1, 0), (0, 1), (0, -1)]
    }, hermitian=True)


def rng(seed=0):
    return np.random.default_rng(seed)
