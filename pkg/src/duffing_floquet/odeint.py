"""Adaptive Dormand-Prince 5(4) integration of the Duffing system.

The augmented system carries the variational matrix ``Phi`` alongside the
orbit, ``Phi' = A(t) Phi`` with ``A(t) = [[0, 1], [-gx(t, x(t)), -c]]`` and
``Phi(t0) = I``, so that ``Phi(T)`` is the monodromy matrix of the
linearization along the computed trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .problem import DuffingProblem

__all__ = [
    "PlanarState",
    "AugmentedState",
    "IntegratorSettings",
    "Trajectory",
    "IntegrationError",
    "StepUnderflow",
    "MaxStepsExceeded",
    "dopri54",
    "rhs",
    "integrate",
    "integrate_with_variational",
]


class IntegrationError(RuntimeError):
    pass


class StepUnderflow(IntegrationError):
    def __init__(self, t: float, h: float, h_min: float):
        super().__init__(f"required step {h:.3e} below h_min={h_min:.3e} at t={t!r}")
        self.t = t
        self.h = h


class MaxStepsExceeded(IntegrationError):
    def __init__(self, t: float, max_steps: int):
        super().__init__(f"more than {max_steps} steps needed; stopped at t={t!r}")
        self.t = t


class PlanarState(NamedTuple):
    x: float
    v: float


@dataclass(frozen=True)
class AugmentedState:
    state: PlanarState
    Phi: np.ndarray


@dataclass(frozen=True)
class IntegratorSettings:
    """Step-size control parameters.

    ``h_init``, ``h_min`` and ``h_max`` default to ``T/256``, ``1e-12*T`` and
    ``T/16`` for the problem period ``T`` when left as ``None``.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    h_init: float | None = None
    h_min: float | None = None
    h_max: float | None = None
    max_steps: int = 10**7

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")

    def steps_for(self, T: float) -> tuple[float, float, float]:
        h_min = self.h_min if self.h_min is not None else 1e-12 * T
        h_max = self.h_max if self.h_max is not None else T / 16.0
        h_init = self.h_init if self.h_init is not None else min(T / 256.0, h_max)
        if not 0 < h_min <= h_init <= h_max:
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        return h_init, h_min, h_max


class Trajectory(NamedTuple):
    """States at every accepted step (including both endpoints)."""

    t: np.ndarray
    y: np.ndarray


# Dormand-Prince 5(4) tableau; row i of _A gives stage i+1 from stages 0..i
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
# fifth minus fourth order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_ALPHA = 0.7 / 4
_BETA = 0.4 / 4
_FAC_MIN = 0.2
_FAC_MAX = 5.0


def dopri54(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t1: float,
    *,
    rel_tol: float,
    abs_tol: float,
    h_init: float,
    h_min: float,
    h_max: float,
    max_steps: int,
    dense: bool = False,
) -> tuple[np.ndarray, Trajectory | None]:
    """Integrate ``y' = f(t, y)`` from ``t0`` to exactly ``t1``.

    Local error per step is kept below ``rel_tol*|y| + abs_tol`` in every
    component; the step size follows a PI controller.
    """
    y = np.array(y0, dtype=float)
    ts = [t0] if dense else None
    ys = [y.copy()] if dense else None
    if t1 == t0:
        return y, (Trajectory(np.array(ts), np.array(ys)) if dense else None)
    if not t1 > t0:
        raise ValueError("t1 must not precede t0")

    t = t0
    h = min(h_init, h_max)
    k1 = f(t, y)
    K = np.empty((7, y.size))
    err_prev = 1e-4
    rejected = False
    attempts = 0
    while True:
        attempts += 1
        if attempts > max_steps:
            raise MaxStepsExceeded(t, max_steps)
        last = t + h * (1.0 + 1e-12) >= t1
        if last:
            h = t1 - t

        K[0] = k1
        for i in range(1, 6):
            K[i] = f(t + _C[i] * h, y + h * (_A[i, :i] @ K[:i]))
        y_new = y + h * (_A[6, :6] @ K[:6])
        t_new = t1 if last else t + h
        K[6] = f(t_new, y_new)
        err_vec = h * (_E @ K)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not math.isfinite(err):
            err = math.inf

        if err <= 1.0:
            t, y, k1 = t_new, y_new, K[6].copy()
            if dense:
                ts.append(t)
                ys.append(y.copy())
            if last:
                break
            fac = _SAFETY * max(err, 1e-10) ** (-_ALPHA) * err_prev**_BETA
            fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            if rejected:
                fac = min(fac, 1.0)
            err_prev = max(err, 1e-4)
            rejected = False
        else:
            fac = _FAC_MIN if err == math.inf else max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))
            rejected = True
        h_next = min(h * fac, h_max)
        if h_next < h_min and t + h_next < t1:
            raise StepUnderflow(t, h_next, h_min)
        h = h_next

    return y, (Trajectory(np.array(ts), np.array(ys)) if dense else None)


def _settings(p: DuffingProblem, settings: IntegratorSettings | None) -> dict:
    settings = settings or IntegratorSettings()
    h_init, h_min, h_max = settings.steps_for(p.T)
    return dict(
        rel_tol=settings.rel_tol,
        abs_tol=settings.abs_tol,
        h_init=h_init,
        h_min=h_min,
        h_max=h_max,
        max_steps=settings.max_steps,
    )


def rhs(p: DuffingProblem, t: float, s) -> PlanarState:
    """Right-hand side ``(v, h(t) - c v - g(t, x))`` of the first-order system."""
    x, v = s
    return PlanarState(v, p.h(t) - p.c * v - p.g(t, x))


def _orbit_field(p: DuffingProblem):
    c, g, h = p.c, p.g, p.h

    def f(t, y):
        x, v = y
        return np.array((v, h(t) - c * v - g(t, x)))

    return f


def _augmented_field(p: DuffingProblem):
    c, g, gx, h = p.c, p.g, p.gx, p.h

    def f(t, y):
        x, v, p11, p12, p21, p22 = y
        k = gx(t, x)
        return np.array((v, h(t) - c * v - g(t, x), p21, p22, -k * p11 - c * p21, -k * p12 - c * p22))

    return f


def integrate(
    p: DuffingProblem,
    s0,
    t0: float,
    t1: float,
    settings: IntegratorSettings | None = None,
    dense: bool = False,
):
    """State at ``t1`` of the solution through ``s0`` at ``t0``.

    With ``dense=True`` returns ``(state, Trajectory)``.
    """
    y, traj = dopri54(_orbit_field(p), t0, tuple(s0), t1, dense=dense, **_settings(p, settings))
    state = PlanarState(float(y[0]), float(y[1]))
    return (state, traj) if dense else state


def integrate_with_variational(
    p: DuffingProblem,
    s0,
    t0: float,
    t1: float,
    settings: IntegratorSettings | None = None,
    dense: bool = False,
):
    """Orbit and variational matrix at ``t1``; error control covers all six components.

    With ``dense=True`` returns ``(AugmentedState, Trajectory)`` where the
    trajectory rows are ``(x, v, Phi11, Phi12, Phi21, Phi22)``.
    """
    y0 = (float(s0[0]), float(s0[1]), 1.0, 0.0, 0.0, 1.0)
    y, traj = dopri54(_augmented_field(p), t0, y0, t1, dense=dense, **_settings(p, settings))
    aug = AugmentedState(PlanarState(float(y[0]), float(y[1])), y[2:].reshape(2, 2).copy())
    return (aug, traj) if dense else aug
