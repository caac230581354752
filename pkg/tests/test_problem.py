import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duffing_floquet.problem import (
    SampleGrid,
    SchemaError,
    ValidationError,
    default_grid,
    load_problem,
    make_problem,
    sample_bounds,
)

LINEAR = {"c": 1, "T": "2*pi", "g": "2*x", "gx": "2", "h": "cos(t)"}


class TestLoad:
    def test_valid(self):
        p = load_problem(LINEAR)
        assert p.c == 1.0 and p.T == pytest.approx(2 * math.pi, rel=1e-15)
        assert p.autonomous
        assert p.g(0.0, 3.0) == 6.0

    def test_whole_document(self):
        assert load_problem({"problem": LINEAR}).T == load_problem(LINEAR).T

    @pytest.mark.parametrize("c", [-1, 0, "0"])
    def test_nonpositive_damping(self, c):
        with pytest.raises(ValidationError, match="c must be positive"):
            load_problem({**LINEAR, "c": c})

    def test_nonpositive_period(self):
        with pytest.raises(ValidationError, match="T must be positive"):
            load_problem({**LINEAR, "T": "-pi"})

    def test_wrong_period_witness(self):
        with pytest.raises(ValidationError, match="periodic") as info:
            load_problem({**LINEAR, "g": "sin(t/2)*x", "gx": "sin(t/2)"})
        assert "t" in info.value.witness

    def test_forcing_period(self):
        with pytest.raises(ValidationError, match="h is not T-periodic"):
            load_problem({**LINEAR, "h": "cos(t/3)"})

    def test_wrong_derivative(self):
        with pytest.raises(ValidationError, match="finite-difference") as info:
            load_problem({**LINEAR, "g": "x^3", "gx": "2*x^2"})
        assert info.value.witness["mismatch"] > 1

    def test_forcing_must_not_depend_on_x(self):
        with pytest.raises(ValidationError):
            load_problem({**LINEAR, "h": "cos(t) + x"})

    def test_missing_and_extra_fields(self):
        with pytest.raises(SchemaError, match="missing"):
            load_problem({k: v for k, v in LINEAR.items() if k != "gx"})
        with pytest.raises(SchemaError, match="unknown"):
            load_problem({**LINEAR, "k": 1})

    def test_domain_error_becomes_validation_error(self):
        with pytest.raises(ValidationError, match="domain"):
            load_problem({**LINEAR, "g": "ln(x)", "gx": "1/x"})

    def test_constant_expression_damping(self):
        assert load_problem({**LINEAR, "c": "1/2"}).c == 0.5


class TestBounds:
    def test_constant_derivative(self):
        p = load_problem(LINEAR)
        grid = default_grid(p.T)
        b = sample_bounds(p, grid)
        assert np.all(b.alpha_hat == 2.0) and np.all(b.beta_hat == 2.0)
        assert b.beta_integral == pytest.approx(2 * p.T, rel=1e-14)

    def test_atan_derivative(self):
        p = make_problem(1, "2*pi", "atan(x)", "1/(1+x^2)", "cos(t)")
        grid = SampleGrid.uniform(p.T, 64, (-10, 10), 201)
        b = sample_bounds(p, grid)
        assert b.global_min == pytest.approx(1 / 101, rel=1e-14)
        assert b.global_max == 1.0
        assert b.beta_integral == pytest.approx(2 * math.pi / 101, rel=1e-12)

    def test_cosine_integral_vanishes(self):
        p = make_problem(1, "2*pi", "cos(t)*x", "cos(t)", "0")
        b = sample_bounds(p, default_grid(p.T))
        assert abs(b.beta_integral) < 1e-12

    @given(st.integers(2, 40), st.integers(2, 40), st.integers(1, 4))
    @settings(max_examples=30, deadline=None)
    def test_refinement_never_shrinks(self, nt, nx, k):
        p = make_problem(1, "2*pi", "x^3/3 + sin(t)*x", "x^2 + sin(t)", "0", grid=SampleGrid.uniform(2 * math.pi, 8, (-1, 1), 8))
        coarse = SampleGrid.uniform(p.T, nt, (-3, 3), nx)
        fine = SampleGrid.uniform(p.T, k * (nt - 1) + 1, (-3, 3), k * (nx - 1) + 1)
        bc, bf = sample_bounds(p, coarse), sample_bounds(p, fine)
        assert bf.global_min <= bc.global_min and bf.global_max >= bc.global_max
        assert np.all(bf.beta_hat <= bf.alpha_hat)


class TestGrid:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            SampleGrid([0.0, 2.0, 1.0], [0.0])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SampleGrid([], [0.0])
