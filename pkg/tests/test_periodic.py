import math

import numpy as np
import pytest

from duffing_floquet.floquet import PairClass, spectrum
from duffing_floquet.odeint import integrate
from duffing_floquet.periodic import (
    NoConvergence,
    ShootingSettings,
    SingularJacobian,
    find_periodic,
    gx_along_orbit,
    poincare,
    start_grid,
    uniqueness_probe,
)
from duffing_floquet.problem import make_problem


def test_linear_orbit(linear_problem):
    orbit = find_periodic(linear_problem, (0.0, 0.0))
    # x = (2 cos t + sin t)/5 + ... : particular solution (cos t + sin t)/2 at t = 0
    assert orbit.s0.x == pytest.approx(0.5, abs=1e-10)
    assert orbit.s0.v == pytest.approx(0.5, abs=1e-10)
    assert orbit.iterations <= 5
    assert orbit.residual <= 1e-10


def test_newton_step_is_exact_on_linear_problem(linear_problem):
    orbit = find_periodic(linear_problem, (3.0, -2.0))
    assert orbit.iterations == 1
    assert orbit.residual <= 100 * 1e-10


def test_unforced_linear_goes_to_origin():
    p = make_problem(1, "2*pi", "2*x", "2", "0")
    orbit = find_periodic(p, (0.1, 0.1))
    assert abs(orbit.s0.x) < 1e-10 and abs(orbit.s0.v) < 1e-10


def test_singular_jacobian():
    p = make_problem(1, "2*pi", "0", "0", "0")
    with pytest.raises(SingularJacobian):
        find_periodic(p, (0.1, 0.1))


def test_no_convergence_when_no_orbit_exists():
    p = make_problem(1, "2*pi", "atan(x)", "1/(1+x^2)", "2 + cos(t)")
    with pytest.raises(NoConvergence) as info:
        find_periodic(p, (0.0, 0.0))
    assert info.value.iterations >= 1


def test_iteration_limit(t2_problem):
    with pytest.raises(NoConvergence, match="iteration limit"):
        find_periodic(t2_problem, (5.0, 5.0), ShootingSettings(max_iter=0))


def test_orbit_reverifies(t2_problem):
    orbit = find_periodic(t2_problem, (1.0, 1.0))
    end = integrate(t2_problem, orbit.s0, 0.0, t2_problem.T)
    assert math.hypot(end.x - orbit.s0.x, end.v - orbit.s0.v) <= 10 * 1e-10
    assert orbit.samples[0, 0] == 0.0 and orbit.samples[-1, 0] == t2_problem.T


def test_poincare_jacobian_matches_finite_difference(t2_problem):
    s = np.array([0.3, -0.2])
    _, J = poincare(t2_problem, s)
    d = 1e-6
    fd = np.column_stack(
        [(np.asarray(poincare(t2_problem, s + d * e)[0]) - np.asarray(poincare(t2_problem, s - d * e)[0])) / (2 * d) for e in np.eye(2)]
    )
    assert np.max(np.abs(J - fd)) < 1e-6


def test_gx_along_orbit(t2_problem):
    orbit = find_periodic(t2_problem, (0.0, 0.0))
    lo, hi, mean = gx_along_orbit(t2_problem, orbit)
    assert 2.0 <= lo <= mean <= hi <= 2.5


def test_probe_linear(linear_problem):
    res = uniqueness_probe(linear_problem, start_grid((-2, -2), (2, 2), 3))
    assert len(res.clusters) == 1
    assert res.n_converged == 9
    assert res.clusters[0].orbit.s0.x == pytest.approx(0.5, abs=1e-9)


def test_probe_bistable():
    p = make_problem(1, "2*pi", "x^3 - x", "3*x^2 - 1", "0")
    res = uniqueness_probe(p, start_grid((-2, -2), (2, 2), 5))
    xs = sorted(round(cl.orbit.s0.x, 6) for cl in res.clusters)
    assert len(res.clusters) >= 2
    assert -1.0 in xs and 1.0 in xs


def test_probe_clusters_in_discovery_order():
    p = make_problem(1, "2*pi", "x^3 - x", "3*x^2 - 1", "0")
    res = uniqueness_probe(p, [(1.1, 0.0), (-1.1, 0.0), (0.9, 0.0)])
    assert [round(cl.orbit.s0.x) for cl in res.clusters] == [1, -1]
    assert res.clusters[0].count == 2


def test_probe_needs_starts(linear_problem):
    with pytest.raises(ValueError):
        uniqueness_probe(linear_problem, [])


def test_t2_probe_single_complex_orbit(t2_problem):
    res = uniqueness_probe(t2_problem, start_grid((-5, -5), (5, 5), 3))
    assert len(res.clusters) == 1
    assert spectrum(res.clusters[0].orbit.monodromy).pair_class == PairClass.COMPLEX_PAIR
