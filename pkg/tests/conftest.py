import math

import numpy as np
import pytest

from duffing_floquet.problem import make_problem


def expm2(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a real 2x2 matrix by eigendecomposition (oracle)."""
    vals, vecs = np.linalg.eig(A)
    if abs(vals[0] - vals[1]) < 1e-9 * (1 + abs(vals[0])):
        # repeated eigenvalue: exp(A) = e^l (I + (A - l I))  for nilpotent part
        lam = vals[0].real
        N = A - lam * np.eye(2)
        return math.exp(lam) * (np.eye(2) + N)
    return (vecs @ np.diag(np.exp(vals)) @ np.linalg.inv(vecs)).real


@pytest.fixture(scope="session")
def linear_problem():
    return make_problem(1, "2*pi", "2*x", "2", "cos(t)")


@pytest.fixture(scope="session")
def t2_problem():
    return make_problem(1, "2*pi", "2*x + 0.5*atan(x)", "2 + 0.5/(1 + x^2)", "cos(t)")


@pytest.fixture(scope="session")
def t1_problem():
    return make_problem(1, "2*pi", "0.3*atan(x) + 0.1*x", "0.3/(1 + x^2) + 0.1", "cos(t)")
