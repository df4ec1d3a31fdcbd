import numpy as np
import pytest

from qpsi.qubit import QubitState

SQRT2 = np.sqrt(2.0)
H_LITERAL = np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2

# worked example inputs
U_EX = (2, 5, 7, 9, 13, 17, 20, 35)
S_A_EX = frozenset({5, 7, 17, 20})
S_B_EX = frozenset({7, 13, 17, 35})


def three_sigma(p, n):
    return 3.0 * np.sqrt(p * (1 - p) / n)


def random_state(rng: np.random.Generator) -> QubitState:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return QubitState(v[0], v[1])


@pytest.fixture
def np_rng():
    return np.random.default_rng(20261016)
