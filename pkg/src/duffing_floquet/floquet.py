"""Monodromy matrices, Floquet multipliers and the stability classification.

For ``x'' + c x' + p(t) x = 0`` the monodromy determinant is fixed by the
Jacobi-Liouville formula, ``det M(T) = exp(-c T)``; multipliers therefore
come from the trace alone, and a complex pair always has modulus
``exp(-c T / 2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .odeint import IntegratorSettings, dopri54, integrate_with_variational, _settings
from .problem import DuffingProblem

__all__ = [
    "PairClass",
    "Verdict",
    "MonodromyMatrix",
    "FloquetSpectrum",
    "LemmaApplicability",
    "monodromy_at",
    "monodromy_lienard",
    "spectrum",
    "spectrum_from_invariants",
    "check_lemma_bounds",
    "ladder",
    "ladder_cell",
    "DET_RTOL",
    "HYPERBOLIC_MARGIN",
    "DISC_RTOL",
]

DET_RTOL = 1e-6
HYPERBOLIC_MARGIN = 1e-9
DISC_RTOL = 1e-12
LADDER_RTOL = 1e-12


class PairClass(str, Enum):
    COMPLEX_PAIR = "complex_pair"
    REAL_DISTINCT = "real_distinct"
    REAL_DOUBLE = "real_double"


class Verdict(str, Enum):
    ASYMPTOTICALLY_STABLE = "asymptotically_stable"
    UNSTABLE = "unstable"
    NONHYPERBOLIC = "nonhyperbolic"


@dataclass(frozen=True)
class MonodromyMatrix:
    m: np.ndarray
    c: float
    T: float

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.shape != (2, 2) or not np.all(np.isfinite(m)):
            raise ValueError("monodromy must be a finite 2x2 matrix")
        object.__setattr__(self, "m", m)
        expected = math.exp(-self.c * self.T)
        if abs(self.det - expected) > DET_RTOL * expected:
            raise ValueError(f"det M = {self.det!r} violates Jacobi-Liouville (expected {expected!r})")

    @property
    def trace(self) -> float:
        return float(self.m[0, 0] + self.m[1, 1])

    @property
    def det(self) -> float:
        return float(self.m[0, 0] * self.m[1, 1] - self.m[0, 1] * self.m[1, 0])


@dataclass(frozen=True)
class FloquetSpectrum:
    rho1: complex
    rho2: complex
    lambda1: complex
    lambda2: complex
    pair_class: PairClass
    verdict: Verdict
    decay_rate: float
    T: float = field(default=math.nan)

    @property
    def max_modulus(self) -> float:
        return max(abs(self.rho1), abs(self.rho2))

    def has_negative_real_multiplier(self) -> bool:
        return self.pair_class != PairClass.COMPLEX_PAIR and min(self.rho1.real, self.rho2.real) < 0


def _exponent(rho: complex, T: float) -> complex:
    if rho == 0:
        return complex(-math.inf, 0.0)
    return cmath.log(rho) / T


def _verdict(max_mod: float) -> Verdict:
    if max_mod < 1.0 - HYPERBOLIC_MARGIN:
        return Verdict.ASYMPTOTICALLY_STABLE
    if max_mod > 1.0 + HYPERBOLIC_MARGIN:
        return Verdict.UNSTABLE
    return Verdict.NONHYPERBOLIC


def spectrum_from_invariants(tr: float, det: float, T: float) -> FloquetSpectrum:
    """Roots of ``mu**2 - tr*mu + det`` and everything derived from them.

    ``rho1`` is the multiplier of larger modulus (for a complex pair, the one
    with positive imaginary part).
    """
    disc = tr * tr - 4.0 * det
    if abs(disc) <= DISC_RTOL * tr * tr:
        rho1 = rho2 = complex(tr / 2.0)
        pair = PairClass.REAL_DOUBLE
        max_mod = abs(tr) / 2.0
    elif disc > 0:
        # root of larger modulus first, the other from the product to avoid cancellation
        r1 = (tr + math.copysign(math.sqrt(disc), tr)) / 2.0
        r2 = det / r1
        rho1, rho2 = complex(r1), complex(r2)
        pair = PairClass.REAL_DISTINCT
        max_mod = max(abs(r1), abs(r2))
    else:
        im = math.sqrt(-disc) / 2.0
        rho1, rho2 = complex(tr / 2.0, im), complex(tr / 2.0, -im)
        pair = PairClass.COMPLEX_PAIR
        max_mod = math.sqrt(det) if det > 0 else abs(rho1)
    lam1, lam2 = _exponent(rho1, T), _exponent(rho2, T)
    if pair == PairClass.COMPLEX_PAIR and det > 0:
        decay = -math.log(det) / (2.0 * T)
    elif max_mod == 0:
        decay = math.inf
    else:
        decay = -math.log(max_mod) / T
    return FloquetSpectrum(rho1, rho2, lam1, lam2, pair, _verdict(max_mod), decay, T)


def spectrum(M: MonodromyMatrix) -> FloquetSpectrum:
    return spectrum_from_invariants(M.trace, M.det, M.T)


def monodromy_at(p: DuffingProblem, s0, settings: IntegratorSettings | None = None) -> MonodromyMatrix:
    """Variational matrix over ``[0, T]`` along the orbit through ``s0``."""
    aug = integrate_with_variational(p, s0, 0.0, p.T, settings)
    return MonodromyMatrix(aug.Phi, p.c, p.T)


def monodromy_lienard(p: DuffingProblem, s0, settings: IntegratorSettings | None = None) -> MonodromyMatrix:
    """Same monodromy computed in Liénard coordinates ``(x, y = x' + c x)``.

    There the system reads ``x' = y - c x``, ``y' = h - g`` and the
    linearization is ``[[-c, 1], [-gx, 0]]``. The result is similar to
    :func:`monodromy_at` via ``S = [[1, 0], [c, 1]]``.
    """
    c, g, gx, h = p.c, p.g, p.gx, p.h

    def f(t, y):
        x, yy, a, b, d, e = y
        k = gx(t, x)
        return np.array((yy - c * x, h(t) - g(t, x), -c * a + d, -c * b + e, -k * a, -k * b))

    x0, v0 = float(s0[0]), float(s0[1])
    y, _ = dopri54(f, 0.0, (x0, v0 + c * x0, 1.0, 0.0, 0.0, 1.0), p.T, **_settings(p, settings))
    return MonodromyMatrix(y[2:].reshape(2, 2), p.c, p.T)


def ladder(n: int, c: float, T: float) -> float:
    """``lambda_n = n**2 pi**2 / T**2 + c**2 / 4``."""
    return (n * math.pi / T) ** 2 + c * c / 4.0


def ladder_cell(lo: float, hi: float, c: float, T: float) -> int | None:
    """Smallest ``n >= 1`` with ``lambda_n <= lo`` and ``hi <= lambda_{n+1}``.

    Comparisons carry a relative slack of ``LADDER_RTOL`` so that values
    sitting on a rung up to rounding count as inside the closed cell.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        return None
    hi_eff = hi - abs(hi) * LADDER_RTOL
    lo_eff = lo + abs(lo) * LADDER_RTOL
    # smallest n >= 1 with lambda_{n+1} >= hi
    n = max(1, int(T / math.pi * math.sqrt(max(hi - c * c / 4.0, 0.0))) - 2)
    while ladder(n + 1, c, T) < hi_eff:
        n += 1
    while n > 1 and ladder(n, c, T) >= hi_eff:
        n -= 1
    return n if ladder(n, c, T) <= lo_eff else None


@dataclass(frozen=True)
class LemmaApplicability:
    """Which Floquet-lemma regime the linearization along an orbit falls in.

    ``regime`` is ``"A"`` (``gx <= lambda_1``: no negative multipliers, and
    with positive mean of ``gx`` both multipliers inside the unit circle),
    ``"B"`` (``lambda_n <= gx <= lambda_{n+1}``: a complex pair with decay
    rate ``c/2``) or ``"none"``.
    """

    regime: str
    n: int | None
    lo: float
    hi: float
    lambda_1: float
    mean_gx: float | None
    expectation: str

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "n": self.n,
            "gx_range": [self.lo, self.hi],
            "lambda_1": self.lambda_1,
            "mean_gx": self.mean_gx,
            "expectation": self.expectation,
            "scope": "linearized equation along the computed orbit",
        }


def check_lemma_bounds(p: DuffingProblem, orbit_gx_range, mean_gx: float | None = None) -> LemmaApplicability:
    lo, hi = float(orbit_gx_range[0]), float(orbit_gx_range[1])
    if lo > hi:
        raise ValueError("orbit_gx_range must satisfy lo <= hi")
    lam1 = ladder(1, p.c, p.T)
    if hi <= lam1 * (1.0 + LADDER_RTOL):
        if mean_gx is None:
            expectation = "no negative real multipliers"
        elif mean_gx > 0:
            expectation = "no negative real multipliers; asymptotically stable"
        else:
            expectation = "no negative real multipliers; stability not implied (mean gx <= 0)"
        return LemmaApplicability("A", None, lo, hi, lam1, mean_gx, expectation)
    n = ladder_cell(lo, hi, p.c, p.T)
    if n is not None:
        return LemmaApplicability("B", n, lo, hi, lam1, mean_gx, "complex multiplier pair; rate of decay c/2")
    return LemmaApplicability("none", None, lo, hi, lam1, mean_gx, "no lemma applies")
