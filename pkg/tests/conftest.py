import math

import numpy as np
import pytest

from qrandbench.quantum_core import validate_density


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fig2_rho():
    return validate_density(np.array([[3, 1], [1, 1]]) / 4)


@pytest.fixture
def fig3_rho():
    r = 1 / math.sqrt(2)
    return validate_density(np.array([[3, r, r], [r, 2, 1], [r, 1, 2]]) / 7)


@pytest.fixture
def diag_qubit():
    return validate_density(np.diag([0.75, 0.25]))


def hadamard_pvm():
    from qrandbench.quantum_core import pvm_from_basis

    return pvm_from_basis(np.array([[1, 1], [1, -1]]) / math.sqrt(2))
