import numpy as np
import pytest

import fiberspec as fs


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # first kernel call may trigger JIT compilation; keep it out of timings
    fs.CircleMap(2, ((1, 0.1, 0.05),)).inverse_branches(np.array([0.3, 0.7]))


@pytest.fixture(scope="session")
def doubling():
    return fs.CircleMap(2)


@pytest.fixture(scope="session")
def cubing():
    return fs.CircleMap(3)


@pytest.fixture(scope="session")
def pert_half():
    """Degree-2 map with one sine coefficient of amplitude 0.5."""
    return fs.CircleMap(2, ((1, 0.5, 0.0),))
