"""Empirical rate of decay toward a periodic orbit from Poincare iterates.

Distances are sampled at multiples of the period only, which removes the
periodic factor of the Floquet normal form; ``ln d_k`` is then fitted
linearly against ``k T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .odeint import PlanarState, integrate
from .periodic import PeriodicOrbit, ShootingSettings
from .problem import DuffingProblem

__all__ = ["DecayEstimate", "DecayError", "Diverged", "InsufficientPoints", "estimate_decay", "default_delta", "MIN_HORIZON"]

MIN_HORIZON = 5


class DecayError(RuntimeError):
    pass


class Diverged(DecayError):
    def __init__(self, k: int, distance: float, limit: float):
        super().__init__(f"perturbation grew to {distance:.3e} (limit {limit:.3e}) after {k} period(s)")
        self.k = k
        self.distance = distance


class InsufficientPoints(DecayError):
    def __init__(self, found: int):
        super().__init__(f"only {found} distance(s) between the noise floor and the linear-regime cap; need 3")
        self.found = found


@dataclass(frozen=True)
class DecayEstimate:
    rate: float
    r_squared: float
    points: np.ndarray  # rows (k T, ln d_k) used in the fit
    perturbation: PlanarState
    horizon: int
    stderr: float
    distances: np.ndarray  # d_k for k = 0.. (accumulated through the rescalings)


def default_delta(orbit: PeriodicOrbit) -> PlanarState:
    """Perturbation of size ``1e-4 (1 + |s0|)``.

    The direction is the eigenvector of the dominant multiplier when the
    multipliers are real, so the fit is not polluted by the faster mode;
    for a complex pair every direction decays at the same rate and
    ``(1, 1)/sqrt(2)`` is used.
    """
    size = 1e-4 * (1.0 + math.hypot(*orbit.s0))
    m = orbit.monodromy.m
    vals, vecs = np.linalg.eig(m)
    if np.all(np.abs(vals.imag) == 0) and abs(abs(vals[0]) - abs(vals[1])) > 0:
        u = vecs[:, int(np.argmax(np.abs(vals)))].real
        u = u / np.linalg.norm(u)
    else:
        u = np.array([1.0, 1.0]) / math.sqrt(2.0)
    return PlanarState(float(size * u[0]), float(size * u[1]))


def estimate_decay(
    p: DuffingProblem,
    orbit: PeriodicOrbit,
    delta=None,
    horizon: int = 20,
    settings: ShootingSettings | None = None,
) -> DecayEstimate:
    """Fit ``ln d_k = a - rate * k T`` for ``d_k = |P^k(s0 + delta) - s0|``, ``k = 0..horizon``.

    The perturbation is rescaled to ``|delta|`` after every period and the
    growth factors are accumulated, so ``d_k`` equals the unrenormalized
    distance in the linear regime while every measured distance stays far
    above the noise floor ``100 * settings.tol``. Distances beyond
    ``10 |delta|`` are left out of the fit; beyond ``1e3 |delta|`` the
    estimate fails with :class:`Diverged`.
    """
    if horizon < MIN_HORIZON:
        raise ValueError(f"horizon must be >= {MIN_HORIZON}")
    settings = settings or ShootingSettings()
    delta = default_delta(orbit) if delta is None else PlanarState(float(delta[0]), float(delta[1]))
    size = math.hypot(*delta)
    s0 = np.asarray(orbit.s0)
    floor, cap, limit = 100.0 * settings.tol, 10.0 * size, 1e3 * size
    if not size > floor:
        # every distance would sit at the noise floor
        raise InsufficientPoints(0)

    u = np.asarray(delta) / size
    log_d = [math.log(size)]
    for k in range(1, horizon + 1):
        s = integrate(p, PlanarState(*(s0 + size * u)), 0.0, p.T, settings.integrator)
        diff = np.asarray(s) - s0
        d = float(np.linalg.norm(diff))
        if not d > floor:
            break
        log_d.append(log_d[-1] + math.log(d / size))
        if log_d[-1] > math.log(limit):
            raise Diverged(k, math.exp(log_d[-1]), limit)
        u = diff / d
    log_d = np.array(log_d)

    kT = np.arange(log_d.size) * p.T
    use = log_d < math.log(cap)
    if np.count_nonzero(use) < 3:
        raise InsufficientPoints(int(np.count_nonzero(use)))
    x, y = kT[use], log_d[use]
    (slope, intercept), *_ = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = x.size - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(ss_res / dof / sxx) if dof > 0 else math.inf
    return DecayEstimate(
        rate=float(-slope),
        r_squared=r2,
        points=np.column_stack([x, y]),
        perturbation=delta,
        horizon=horizon,
        stderr=stderr,
        distances=np.exp(log_d),
    )
