import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duffing_floquet.odeint import (
    IntegratorSettings,
    MaxStepsExceeded,
    PlanarState,
    dopri54,
    integrate,
    integrate_with_variational,
    rhs,
)
from duffing_floquet.problem import make_problem

from conftest import expm2


def test_rhs_examples(linear_problem):
    assert rhs(linear_problem, 0.0, (0.0, 0.0)) == PlanarState(0.0, 1.0)
    assert rhs(linear_problem, 0.0, (1.0, 1.0)) == PlanarState(1.0, -2.0)
    p = make_problem(1, "2*pi", "2*x", "2", "0")
    assert rhs(p, 0.3, (0.0, 0.0)) == PlanarState(0.0, 0.0)


def test_free_damped_motion():
    p = make_problem(1, "1", "0", "0", "0")
    s = integrate(p, (0.0, 1.0), 0.0, 1.0)
    assert s.x == pytest.approx(1 - math.exp(-1), abs=1e-9)
    assert s.v == pytest.approx(math.exp(-1), abs=1e-9)


def test_equilibrium_preserved(linear_problem):
    p = make_problem(1, "2*pi", "2*x", "2", "0")
    s = integrate(p, (0.0, 0.0), 0.0, p.T)
    assert s == PlanarState(0.0, 0.0)


def test_damped_oscillation_closed_form():
    p = make_problem(1, "2*pi", "2*x", "2", "0")
    s = integrate(p, (1.0, 0.0), 0.0, 2 * math.pi)
    w = math.sqrt(7) / 2
    t = 2 * math.pi
    x = math.exp(-t / 2) * (math.cos(w * t) + math.sin(w * t) / math.sqrt(7))
    v = -math.exp(-t / 2) * (w + 1 / (4 * w)) * math.sin(w * t)
    assert s.x == pytest.approx(x, abs=1e-9)
    assert s.v == pytest.approx(v, abs=1e-9)


def test_zero_interval_gives_identity(t2_problem):
    aug = integrate_with_variational(t2_problem, (0.3, -0.2), 1.0, 1.0)
    assert np.array_equal(aug.Phi, np.eye(2))
    assert aug.state == PlanarState(0.3, -0.2)


@pytest.mark.parametrize("c, T", [(1.0, 1.0), (0.5, 2 * math.pi), (2.0, 3.0)])
def test_free_particle_variational_closed_form(c, T):
    p = make_problem(c, T, "0", "0", "0")
    aug = integrate_with_variational(p, (0.0, 0.0), 0.0, T)
    exact = np.array([[1, (1 - math.exp(-c * T)) / c], [0, math.exp(-c * T)]])
    assert np.max(np.abs(aug.Phi - exact)) < 1e-8


def test_linear_variational_matches_expm():
    p = make_problem(1, "2*pi", "2*x", "2", "0")
    aug = integrate_with_variational(p, (0.0, 0.0), 0.0, p.T)
    exact = expm2(np.array([[0.0, 1.0], [-2.0, -1.0]]) * p.T)
    assert np.max(np.abs(aug.Phi - exact)) < 1e-8


def test_abel_identity_along_dense_output(t2_problem):
    p = t2_problem
    _, traj = integrate_with_variational(p, (1.0, -2.0), 0.0, p.T, dense=True)
    phi = traj.y[:, 2:]
    det = phi[:, 0] * phi[:, 3] - phi[:, 1] * phi[:, 2]
    assert np.allclose(det, np.exp(-p.c * traj.t), rtol=1e-8, atol=0)
    assert traj.t[0] == 0.0 and traj.t[-1] == p.T


def test_step_partition_invariance(t2_problem):
    # integrating [0, T] in one go or via T/3 and 2T/3 agrees to tolerance
    p = t2_problem
    s0 = (0.7, -0.4)
    whole = integrate(p, s0, 0.0, p.T)
    mid = integrate(p, integrate(p, s0, 0.0, p.T / 3), p.T / 3, 2 * p.T / 3)
    parts = integrate(p, mid, 2 * p.T / 3, p.T)
    assert np.allclose(whole, parts, atol=1e-8)


def test_tolerance_convergence(t2_problem):
    p = t2_problem
    ref = integrate(p, (1.0, 0.0), 0.0, p.T, IntegratorSettings(1e-13, 1e-13))
    errs = [
        max(abs(a - b) for a, b in zip(integrate(p, (1.0, 0.0), 0.0, p.T, IntegratorSettings(tol, tol)), ref))
        for tol in (1e-6, 1e-8, 1e-10)
    ]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


def test_max_steps():
    p = make_problem(1, "2*pi", "2*x", "2", "cos(t)")
    with pytest.raises(MaxStepsExceeded):
        integrate(p, (0.0, 0.0), 0.0, p.T, IntegratorSettings(max_steps=3))


def test_dopri_exponential():
    y, traj = dopri54(lambda t, y: -y, 0.0, [1.0], 2.0, rel_tol=1e-12, abs_tol=1e-12, h_init=0.1, h_min=1e-12, h_max=0.5, max_steps=10**5, dense=True)
    assert y[0] == pytest.approx(math.exp(-2.0), rel=1e-10)
    assert np.all(np.diff(traj.t) > 0)


@given(st.floats(0.2, 3.0), st.floats(1.0, 10.0), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=15, deadline=None)
def test_liouville_property(c, T, x0, v0):
    p = make_problem(c, T, "x + 0.5*sin(x)", "1 + 0.5*cos(x)", "0")
    aug = integrate_with_variational(p, (x0, v0), 0.0, T)
    assert np.linalg.det(aug.Phi) == pytest.approx(math.exp(-c * T), rel=1e-6)
