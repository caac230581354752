"""Period map, Newton shooting for T-periodic solutions and a multi-start probe.

A solution through ``s`` at ``t = 0`` is T-periodic iff ``s`` is a fixed
point of the period map ``P(s) = state at time T``. The Jacobian of ``P`` is
the variational matrix ``Phi(T)``, so Newton's method solves
``(Phi(T) - I) ds = -(P(s) - s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import DomainError
from .floquet import MonodromyMatrix
from .odeint import IntegrationError, IntegratorSettings, PlanarState, integrate_with_variational
from .problem import DuffingProblem

__all__ = [
    "ShootingSettings",
    "PeriodicOrbit",
    "ShootingError",
    "NoConvergence",
    "SingularJacobian",
    "OrbitCluster",
    "ProbeResult",
    "poincare",
    "find_periodic",
    "uniqueness_probe",
    "gx_along_orbit",
    "start_grid",
]


class ShootingError(RuntimeError):
    pass


class NoConvergence(ShootingError):
    def __init__(self, reason: str, iterations: int, residual: float, state):
        super().__init__(f"{reason} after {iterations} iteration(s); residual {residual:.3e}")
        self.reason = reason
        self.iterations = iterations
        self.residual = residual
        self.state = state


class SingularJacobian(ShootingError):
    def __init__(self, state, det: float, norm: float):
        super().__init__(
            f"Phi(T) - I is singular at {tuple(state)} (det {det:.3e}, norm {norm:.3e}): "
            "a Floquet multiplier equals 1"
        )
        self.state = state
        self.det = det
        self.norm = norm


@dataclass(frozen=True)
class ShootingSettings:
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    max_halvings: int = 20
    # iterates leaving this ball are reported as NoConvergence
    escape_radius: float = 1e6
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


@dataclass(frozen=True)
class PeriodicOrbit:
    s0: PlanarState
    residual: float
    monodromy: MonodromyMatrix
    samples: np.ndarray  # rows (t, x, v) at the accepted integration steps over [0, T]
    iterations: int = 0


def _state(s) -> PlanarState:
    return PlanarState(float(s[0]), float(s[1]))


def poincare(p: DuffingProblem, s, settings: IntegratorSettings | None = None) -> tuple[PlanarState, np.ndarray]:
    """Image of ``s`` under the period map and the Jacobian ``Phi(T)``."""
    aug = integrate_with_variational(p, s, 0.0, p.T, settings)
    return aug.state, aug.Phi


def _try_poincare(p, s, settings):
    try:
        img, J = poincare(p, s, settings)
    except (IntegrationError, DomainError, ArithmeticError):
        return None
    if not (np.all(np.isfinite(img)) and np.all(np.isfinite(J))):
        return None
    return img, J


def find_periodic(
    p: DuffingProblem, guess, settings: ShootingSettings | None = None
) -> PeriodicOrbit:
    """Damped Newton iteration on ``P(s) - s`` starting from ``guess``.

    Each Newton step is halved (by ``settings.damping``) until the residual
    norm decreases by the Armijo factor ``1 - 1e-4*step``.
    """
    settings = settings or ShootingSettings()
    integ = settings.integrator
    s = np.array([float(guess[0]), float(guess[1])])
    img, J = poincare(p, s, integ)
    r = np.asarray(img) - s
    rn = float(np.linalg.norm(r))
    it = 0
    while rn > settings.tol:
        if it >= settings.max_iter:
            raise NoConvergence("iteration limit reached", it, rn, _state(s))
        A = J - np.eye(2)
        det = float(np.linalg.det(A))
        scale = float(np.linalg.norm(A))
        if abs(det) < 1e-12 * scale**2:
            raise SingularJacobian(_state(s), det, scale)
        step = -np.linalg.solve(A, r)
        lam = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = s + lam * step
            out = _try_poincare(p, trial, integ)
            if out is not None:
                r_trial = np.asarray(out[0]) - trial
                rn_trial = float(np.linalg.norm(r_trial))
                if rn_trial <= (1.0 - 1e-4 * lam) * rn:
                    break
            lam *= settings.damping
        else:
            raise NoConvergence("line search failed to reduce the residual", it + 1, rn, _state(s))
        s, (img, J), r, rn = trial, out, r_trial, rn_trial
        it += 1
        if not np.linalg.norm(s) <= settings.escape_radius:
            raise NoConvergence("iterate left the search region", it, rn, _state(s))

    s0 = PlanarState(float(s[0]), float(s[1]))
    aug, traj = integrate_with_variational(p, s0, 0.0, p.T, integ, dense=True)
    samples = np.column_stack([traj.t, traj.y[:, 0], traj.y[:, 1]])
    return PeriodicOrbit(s0, rn, MonodromyMatrix(aug.Phi, p.c, p.T), samples, it)


def gx_along_orbit(p: DuffingProblem, orbit: PeriodicOrbit) -> tuple[float, float, float]:
    """``(min, max, mean)`` of ``gx(t, x(t))`` over the orbit samples (trapezoid mean)."""
    t, x = orbit.samples[:, 0], orbit.samples[:, 1]
    values = p.gx.vectorized(t, x)
    mean = float(np.trapezoid(values, t) / (t[-1] - t[0]))
    return float(values.min()), float(values.max()), mean


def start_grid(lo, hi, n: int) -> list[PlanarState]:
    """``n x n`` uniform starts on the box ``[lo[0], hi[0]] x [lo[1], hi[1]]``."""
    xs = np.linspace(lo[0], hi[0], n)
    vs = np.linspace(lo[1], hi[1], n)
    return [PlanarState(float(x), float(v)) for x in xs for v in vs]


@dataclass
class OrbitCluster:
    orbit: PeriodicOrbit
    count: int
    starts: list = field(default_factory=list)


@dataclass
class ProbeResult:
    clusters: list[OrbitCluster]
    failures: list[tuple[PlanarState, Exception]]

    @property
    def n_converged(self) -> int:
        return sum(cl.count for cl in self.clusters)


def uniqueness_probe(
    p: DuffingProblem,
    starts,
    settings: ShootingSettings | None = None,
    cluster_radius: float | None = None,
) -> ProbeResult:
    """Shoot from every start and group the converged fixed points.

    Two solutions belong to the same cluster when their initial states are
    within ``cluster_radius`` (default ``1e-6 * (1 + |s0|)`` of the cluster
    representative). Clusters appear in order of first discovery.
    """
    starts = list(starts)
    if not starts:
        raise ValueError("starts must be nonempty")
    clusters: list[OrbitCluster] = []
    failures = []
    for start in starts:
        start = PlanarState(float(start[0]), float(start[1]))
        try:
            orbit = find_periodic(p, start, settings)
        except (ShootingError, IntegrationError, DomainError) as err:
            failures.append((start, err))
            continue
        s0 = np.asarray(orbit.s0)
        for cl in clusters:
            rep = np.asarray(cl.orbit.s0)
            radius = cluster_radius if cluster_radius is not None else 1e-6 * (1.0 + float(np.linalg.norm(rep)))
            if np.linalg.norm(s0 - rep) <= radius:
                cl.count += 1
                cl.starts.append(start)
                break
        else:
            clusters.append(OrbitCluster(orbit, 1, [start]))
    return ProbeResult(clusters, failures)


def residual_of(p: DuffingProblem, s, settings: IntegratorSettings | None = None) -> float:
    img, _ = poincare(p, s, settings)
    return math.hypot(img[0] - s[0], img[1] - s[1])
