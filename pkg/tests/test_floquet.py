import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duffing_floquet.floquet import (
    MonodromyMatrix,
    PairClass,
    Verdict,
    check_lemma_bounds,
    ladder,
    ladder_cell,
    monodromy_at,
    monodromy_lienard,
    spectrum,
    spectrum_from_invariants,
)
from duffing_floquet.problem import make_problem

from conftest import expm2

TWO_PI = 2 * math.pi


def test_free_particle_monodromy():
    p = make_problem(1, 1, "0", "0", "0")
    M = monodromy_at(p, (0.0, 0.0))
    assert np.max(np.abs(M.m - [[1, 1 - math.exp(-1)], [0, math.exp(-1)]])) < 1e-8


@pytest.mark.parametrize("a", [0.0, 0.5, 2.0, 5.0])
@pytest.mark.parametrize("c", [0.5, 1.0])
def test_linear_monodromy_matches_expm(a, c):
    p = make_problem(c, "2*pi", f"{a}*x", f"{a}", "0")
    M = monodromy_at(p, (0.0, 0.0))
    exact = expm2(np.array([[0.0, 1.0], [-a, -c]]) * TWO_PI)
    assert np.max(np.abs(M.m - exact)) < 1e-8


def test_determinant_invariant_enforced():
    with pytest.raises(ValueError, match="Jacobi-Liouville"):
        MonodromyMatrix(np.eye(2), 1.0, 1.0)


def test_linear_spectrum():
    p = make_problem(1, "2*pi", "2*x", "2", "0")
    sp = spectrum(monodromy_at(p, (0.0, 0.0)))
    # characteristic roots (-1 +- i sqrt 7)/2, multipliers exp(2 pi s)
    s = complex(-0.5, math.sqrt(7) / 2)
    expected = cmath.exp(TWO_PI * s)
    assert sp.pair_class == PairClass.COMPLEX_PAIR
    assert sp.verdict == Verdict.ASYMPTOTICALLY_STABLE
    assert abs(sp.rho1 - expected) < 1e-8 or abs(sp.rho1 - expected.conjugate()) < 1e-8
    assert sp.max_modulus == pytest.approx(math.exp(-math.pi), rel=1e-8)
    assert sp.decay_rate == pytest.approx(0.5, rel=1e-9)


def test_diagonal_nonhyperbolic():
    c, T = 1.0, 2.0
    sp = spectrum(MonodromyMatrix(np.diag([math.exp(-c * T), 1.0]), c, T))
    assert sp.pair_class == PairClass.REAL_DISTINCT
    assert sp.verdict == Verdict.NONHYPERBOLIC
    assert {round(sp.rho1.real, 12), round(sp.rho2.real, 12)} == {1.0, round(math.exp(-2), 12)}


def test_pure_imaginary_pair():
    c, T = 1.0, 3.0
    sp = spectrum_from_invariants(0.0, math.exp(-c * T), T)
    assert sp.pair_class == PairClass.COMPLEX_PAIR
    assert sp.rho1 == pytest.approx(1j * math.exp(-c * T / 2))
    assert sp.decay_rate == pytest.approx(c / 2, rel=1e-14)


def test_double_root():
    sp = spectrum_from_invariants(-2 * math.exp(-1.0), math.exp(-2.0), 4.0)
    assert sp.pair_class == PairClass.REAL_DOUBLE
    assert sp.has_negative_real_multiplier()


@given(st.floats(-10, 10), st.floats(1e-6, 5), st.floats(0.5, 10))
@settings(max_examples=300, deadline=None)
def test_multipliers_are_roots(tr, det, T):
    sp = spectrum_from_invariants(tr, det, T)
    assert abs(sp.rho1 + sp.rho2 - tr) <= 1e-9 * (1 + abs(tr))
    assert abs(sp.rho1 * sp.rho2 - det) <= 1e-9 * (1 + det + tr * tr)
    assert abs(sp.rho1) >= abs(sp.rho2) - 1e-12
    if sp.pair_class == PairClass.COMPLEX_PAIR:
        assert abs(sp.rho1) == pytest.approx(math.sqrt(det), rel=1e-12)


class TestLadder:
    def test_values(self):
        assert [ladder(n, 1.0, TWO_PI) for n in (1, 2, 3)] == pytest.approx([0.5, 1.25, 2.5])

    @pytest.mark.parametrize(
        "lo, hi, n", [(2.0, 2.5, 2), (0.5, 0.5, 1), (0.6, 1.3, None), (2.5, 2.5, 2), (3.0, 4.0, 3), (0.1, 0.4, None)]
    )
    def test_cells(self, lo, hi, n):
        assert ladder_cell(lo, hi, 1.0, TWO_PI) == n

    def test_lemma_regimes(self):
        p = make_problem(1, "2*pi", "2*x", "2", "0")
        assert check_lemma_bounds(p, (2.0, 2.0)).regime == "B"
        assert check_lemma_bounds(p, (2.0, 2.0)).n == 2
        assert check_lemma_bounds(p, (0.1, 0.1), 0.1).regime == "A"
        assert "asymptotically stable" in check_lemma_bounds(p, (0.1, 0.1), 0.1).expectation
        assert check_lemma_bounds(p, (0.4, 1.3)).regime == "none"


@pytest.mark.parametrize("start", [(0.0, 0.0), (1.5, -0.7)])
def test_lienard_monodromy_is_similar(t2_problem, start):
    M = monodromy_at(t2_problem, start)
    L = monodromy_lienard(t2_problem, start)
    S = np.array([[1.0, 0.0], [t2_problem.c, 1.0]])
    assert np.max(np.abs(np.linalg.inv(S) @ L.m @ S - M.m)) < 1e-8
    assert L.trace == pytest.approx(M.trace, abs=1e-8)
