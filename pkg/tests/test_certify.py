import math

import numpy as np
import pytest

from duffing_floquet.certify import (
    NotMonotone,
    Status,
    check_lemma32,
    check_theorem1,
    check_theorem2,
    check_theorem3,
)
from duffing_floquet.problem import SampleGrid, default_grid, make_problem


def _p(g, gx, h="cos(t)"):
    return make_problem(1, "2*pi", g, gx, h)


@pytest.fixture(scope="module")
def grid():
    return default_grid(2 * math.pi)


class TestTheorem1:
    def test_passes(self, t1_problem, grid):
        r = check_theorem1(t1_problem, grid)
        assert r.passed and r.theorem == "T1"
        assert r.predicted_conclusion
        assert any("proxy" in note for note in r.notes)
        assert any("[-20.0, 20.0]" in note for note in r.notes)

    def test_alpha_violation_has_witness(self, grid):
        r = check_theorem1(_p("x", "1"), grid)
        cond = r.conditions[0]
        assert cond.status == Status.VIOLATED
        assert cond.witness["gx"] == 1.0 and cond.witness["lambda_1"] == 0.5
        assert r.predicted_conclusion == ""

    def test_integral_violation(self, grid):
        r = check_theorem1(_p("0.1*cos(t)*atan(x)", "0.1*cos(t)/(1+x^2)"), grid)
        assert r.conditions[1].status == Status.VIOLATED
        assert not r.passed

    def test_touching_everywhere_fails_proxy(self, grid):
        # alpha equal to lambda_1 at every sample: never strictly below
        r = check_theorem1(_p("0.5*x", "0.5"), grid)
        assert r.conditions[0].status == Status.VIOLATED
        assert r.conditions[0].witness["strict_fraction"] == 0.0

    def test_violation_survives_refinement(self):
        p = _p("0.3*atan(x) + 0.45*x*cos(t)^2", "0.3/(1+x^2) + 0.45*cos(t)^2")
        coarse = SampleGrid.uniform(p.T, 9, (-5, 5), 11)
        fine = SampleGrid.uniform(p.T, 33, (-5, 5), 41)
        rc, rf = check_theorem1(p, coarse), check_theorem1(p, fine)
        assert rc.conditions[0].status == Status.VIOLATED
        assert rf.conditions[0].status == Status.VIOLATED


class TestTheorem2:
    def test_n2(self, t2_problem, grid):
        r = check_theorem2(t2_problem, grid)
        assert r.passed and r.n == 2
        assert "c/2" in r.predicted_conclusion

    def test_straddling_range(self, grid):
        r = check_theorem2(_p("0.95*x + 0.35*sin(x)", "0.95 + 0.35*cos(x)"), grid)
        assert not r.passed and r.n is None
        assert r.conditions[0].witness["min"]["gx"] < 1.25 < r.conditions[0].witness["max"]["gx"]

    def test_left_edge_included(self, grid):
        r = check_theorem2(_p("0.5*x", "0.5"), grid)
        assert r.passed and r.n == 1

    def test_below_first_rung(self, t1_problem, grid):
        assert not check_theorem2(t1_problem, grid).passed


class TestTheorem3:
    def test_passes(self, t2_problem, grid):
        r = check_theorem3(t2_problem, grid, grid.x_points)
        assert r.passed and r.n == 2
        assert any("n >= 1" in note for note in r.notes)

    def test_constant_forcing_plateau(self, grid):
        r = check_theorem3(_p("2*x + 0.5*atan(x)", "2 + 0.5/(1+x^2)", "1"), grid)
        assert r.conditions[1].name == "critical-set-null"
        assert r.conditions[1].status == Status.VIOLATED

    def test_cubic_secants(self, grid):
        r = check_theorem3(_p("x^3", "3*x^2"), grid)
        cond = r.conditions[0]
        assert cond.status == Status.VIOLATED
        assert cond.witness["slope"] > 1e3

    def test_nonautonomous(self, grid):
        r = check_theorem3(_p("2*x + 0.1*sin(t)*atan(x)", "2 + 0.1*sin(t)/(1+x^2)"), grid)
        assert r.conditions[0].status == Status.NOT_APPLICABLE
        assert not r.passed and r.predicted_conclusion == ""

    def test_agrees_with_theorem2(self, t2_problem, grid):
        assert check_theorem3(t2_problem, grid).n == check_theorem2(t2_problem, grid).n


class TestLemma32:
    def test_exists(self):
        r = check_lemma32(_p("atan(x)", "1/(1+x^2)", "1 + cos(t)"), (-20, 20))
        assert r.passed
        assert r.conditions[0].witness["h_mean"] == pytest.approx(1.0, abs=1e-12)

    def test_does_not_exist(self):
        r = check_lemma32(_p("atan(x)", "1/(1+x^2)", "2 + cos(t)"), (-20, 20))
        assert not r.passed
        assert r.conditions[0].witness["h_mean"] == pytest.approx(2.0, abs=1e-12)

    def test_surjective(self):
        assert check_lemma32(_p("x", "1", "3 + sin(t)"), (-20, 20)).passed

    def test_not_monotone(self):
        with pytest.raises(NotMonotone):
            check_lemma32(_p("x^3 - x", "3*x^2 - 1"), (-2, 2))
