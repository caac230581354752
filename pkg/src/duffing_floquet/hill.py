"""Piecewise-constant Hill equation with period 2*pi.

The damped equation ``x'' + c x' + q(t) x = 0`` with

    q(t) = c**2/4 + (w + eps)**2   on [0, pi)
    q(t) = c**2/4 + (w - eps)**2   on [pi, 2*pi)

becomes ``y'' + (q(t) - c**2/4) y = 0`` under ``y = exp(c t / 2) x``, i.e. two
harmonic segments with frequencies ``w + eps`` and ``w - eps``. Its monodromy
is ``A = A2 @ A1`` with ``det A = 1``, so stability is decided by
``|tr A| < 2``; the resonance tongues are bounded by ``|tr A| = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .floquet import FloquetSpectrum, PairClass, _exponent, _verdict, DISC_RTOL
from .problem import DuffingProblem, SampleGrid, make_problem

__all__ = [
    "HillParams",
    "TongueBoundary",
    "RangeTooCoarse",
    "PERIOD",
    "segment_matrix",
    "discriminant",
    "closed_form_trace",
    "boundary_scan",
    "scan_grid",
    "asymptotic_boundary",
    "damped_multipliers",
    "as_duffing_problem",
    "duffing_fields",
]

PERIOD = 2.0 * math.pi
SEGMENT = math.pi
_SMALL_OMEGA = 1e-8
BISECT_TOL = 1e-12


class RangeTooCoarse(ValueError):
    def __init__(self, center: float, eps: float, found: int):
        super().__init__(
            f"tongue at w={center:g} (eps={eps:g}): found {found} boundary crossing(s), need 2; "
            "widen the range or raise the resolution"
        )
        self.center = center
        self.found = found


@dataclass(frozen=True)
class HillParams:
    w: float
    eps: float
    c: float = 0.0

    def __post_init__(self):
        if self.eps < 0 or self.c < 0:
            raise ValueError("eps and c must be nonnegative")
        if not self.w > self.eps:
            raise ValueError("need w > eps (imaginary segment frequencies are not supported)")


@dataclass(frozen=True)
class TongueBoundary:
    center: float  # k or k + 1/2
    eps: float
    w_lower: float
    w_upper: float
    w_asymptotic_lower: float
    w_asymptotic_upper: float

    @property
    def label(self) -> str:
        k = int(math.floor(self.center))
        return f"k={k}" if self.center == k else f"k+1/2, k={k}"

    @property
    def width(self) -> float:
        return self.w_upper - self.w_lower


def segment_matrix(omega: float, length: float) -> np.ndarray:
    """Transfer matrix of ``y'' + omega**2 y = 0`` over an interval of ``length``."""
    if not length > 0:
        raise ValueError("length must be positive")
    c = math.cos(omega * length)
    if abs(omega) < _SMALL_OMEGA:
        s_over_w = length * np.sinc(omega * length / math.pi)
    else:
        s_over_w = math.sin(omega * length) / omega
    return np.array([[c, s_over_w], [-omega * math.sin(omega * length), c]])


def monodromy(params: HillParams) -> np.ndarray:
    """``A = A2 @ A1`` of the reduced (undamped) equation."""
    a1 = segment_matrix(params.w + params.eps, SEGMENT)
    a2 = segment_matrix(params.w - params.eps, SEGMENT)
    return a2 @ a1


def discriminant(params: HillParams) -> float:
    """``tr A`` from the matrix product."""
    A = monodromy(params)
    return float(A[0, 0] + A[1, 1])


def closed_form_trace(params: HillParams) -> float:
    """``2 cos(pi w1) cos(pi w2) - (w1/w2 + w2/w1) sin(pi w1) sin(pi w2)``, ``w1,2 = w +- eps``."""
    w1, w2 = params.w + params.eps, params.w - params.eps
    return 2 * math.cos(math.pi * w1) * math.cos(math.pi * w2) - (w1 / w2 + w2 / w1) * math.sin(
        math.pi * w1
    ) * math.sin(math.pi * w2)


def _trace_vectorized(w: np.ndarray, eps: float) -> np.ndarray:
    # entries of A1, A2 on the grid, then the trace of the product
    def entries(omega):
        c = np.cos(omega * SEGMENT)
        sw = np.where(
            np.abs(omega) < _SMALL_OMEGA,
            SEGMENT * np.sinc(omega * SEGMENT / math.pi),
            np.sin(omega * SEGMENT) / np.where(omega == 0, 1.0, omega),
        )
        return c, sw, -omega * np.sin(omega * SEGMENT)

    c1, s1, m1 = entries(w + eps)
    c2, s2, m2 = entries(w - eps)
    return c2 * c1 + s2 * m1 + m2 * s1 + c2 * c1


def scan_grid(eps: float, w_range, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """``(w, tr A)`` on a uniform grid of ``resolution`` points."""
    lo, hi = float(w_range[0]), float(w_range[1])
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if not hi > lo:
        raise ValueError("w_range must be a nonempty interval")
    if not lo > eps:
        raise ValueError("w_range must lie above eps")
    w = np.linspace(lo, hi, resolution)
    return w, _trace_vectorized(w, eps)


def _excess(w: float, eps: float) -> float:
    return abs(discriminant(HillParams(w, eps))) - 2.0


def _bisect(a: float, b: float, eps: float) -> float:
    fa = _excess(a, eps)
    while b - a > BISECT_TOL:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = _excess(m, eps)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _crossings(w: np.ndarray, excess: np.ndarray, eps: float) -> list[float]:
    signs = np.sign(excess)
    nz = np.flatnonzero(signs != 0)
    out = []
    for i, j in zip(nz[:-1], nz[1:]):
        if signs[i] != signs[j]:
            out.append(_bisect(float(w[i]), float(w[j]), eps))
    return out


def asymptotic_boundary(center: float, eps: float) -> tuple[float, float]:
    """Small-``eps`` tongue edges around ``center``.

    Integer centers ``k >= 1``: ``k -+ eps**2 / k**2``. Half-integer centers
    ``k + 1/2``: ``k + 1/2 -+ eps / (pi (k + 1/2))``.
    """
    twice = 2.0 * center
    if twice != round(twice) or center <= 0:
        raise ValueError("center must be a positive multiple of 1/2")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if round(twice) % 2 == 0:
        half_width = eps**2 / center**2
    else:
        half_width = eps / (math.pi * center)
    return center - half_width, center + half_width


def boundary_scan(eps: float, w_range, resolution: int) -> list[TongueBoundary]:
    """Locate ``|tr A| = 2`` crossings and pair them into tongues.

    Crossings are bisected to ``1e-12`` and grouped by their nearest
    half-integer center. At ``eps > 0`` every center inside the range must
    show exactly two crossings, otherwise :class:`RangeTooCoarse` is raised.
    """
    w, tr = scan_grid(eps, w_range, resolution)
    crossings = _crossings(w, np.abs(tr) - 2.0, eps)
    by_center: dict[float, list[float]] = {}
    for x in crossings:
        by_center.setdefault(round(2.0 * x) / 2.0, []).append(x)
    lo, hi = float(w[0]), float(w[-1])
    centers = [k / 2 for k in range(max(1, math.ceil(2 * lo)), math.floor(2 * hi) + 1)]
    if eps > 0:
        for center in centers:
            by_center.setdefault(center, [])
    out = []
    for center in sorted(by_center):
        xs = sorted(by_center[center])
        if len(xs) != 2:
            raise RangeTooCoarse(center, eps, len(xs))
        a_lo, a_hi = asymptotic_boundary(center, eps) if center > 0 else (math.nan, math.nan)
        out.append(TongueBoundary(center, eps, xs[0], xs[1], a_lo, a_hi))
    return out


def damped_multipliers(params: HillParams) -> FloquetSpectrum:
    """Floquet data of the damped equation from the reduced Hill multipliers.

    The damped multipliers are ``exp(-c pi) * mu`` with ``mu`` the roots of
    ``mu**2 - tr(A) mu + 1``; the decay rate is ``c/2 - ln(max|mu|) / (2 pi)``.
    """
    tr = discriminant(params)
    disc = tr * tr - 4.0
    if abs(disc) <= DISC_RTOL * tr * tr:
        mu1 = mu2 = complex(tr / 2.0)
        pair = PairClass.REAL_DOUBLE
        mu_max = abs(tr) / 2.0
    elif disc > 0:
        r1 = (tr + math.copysign(math.sqrt(disc), tr)) / 2.0
        mu1, mu2 = complex(r1), complex(1.0 / r1)
        pair = PairClass.REAL_DISTINCT
        mu_max = abs(r1)
    else:
        im = math.sqrt(-disc) / 2.0
        mu1, mu2 = complex(tr / 2.0, im), complex(tr / 2.0, -im)
        pair = PairClass.COMPLEX_PAIR
        mu_max = 1.0
    damp = math.exp(-params.c * PERIOD / 2.0)
    rho1, rho2 = damp * mu1, damp * mu2
    decay = params.c / 2.0 - math.log(mu_max) / PERIOD
    return FloquetSpectrum(
        rho1,
        rho2,
        _exponent(rho1, PERIOD),
        _exponent(rho2, PERIOD),
        pair,
        _verdict(damp * mu_max),
        decay,
        PERIOD,
    )


# (2/pi)(atan(tan(t/2)) - atan(tan(t/2 - pi/2))) is +1 on (0, pi) and -1 on (pi, 2 pi)
SQUARE_WAVE = "(2/pi)*(atan(tan(t/2)) - atan(tan(t/2 - pi/2)))"


def duffing_fields(params: HillParams, forcing: str = "cos(t)", phase: float = 0.0) -> dict:
    """Problem fields of the damped Hill equation written as ``g = q(t - phase) x``.

    A time shift leaves the Floquet multipliers unchanged; a nonzero
    ``phase`` keeps the jumps of ``q`` off the default sample grid.
    """
    if not params.c > 0:
        raise ValueError("the Duffing form needs c > 0")
    w, eps, c = params.w, params.eps, params.c
    wave = SQUARE_WAVE if phase == 0 else SQUARE_WAVE.replace("t/2", f"(t - {phase!r})/2")
    q = f"({c**2 / 4 + w**2 + eps**2!r} + {2 * w * eps!r}*{wave})"
    return {"c": c, "T": "2*pi", "g": f"{q}*x", "gx": q, "h": forcing}


def as_duffing_problem(params: HillParams, forcing: str = "cos(t)") -> DuffingProblem:
    """The damped Hill equation as a linear Duffing problem ``g = q(t) x``.

    ``q`` jumps at ``t = 0`` and ``t = pi``; the load-time sample grid stays
    strictly inside the two segments so the jump is not mistaken for a
    periodicity defect.
    """
    f = duffing_fields(params, forcing)
    t_pts = np.concatenate([np.linspace(0.05, math.pi - 0.05, 64), np.linspace(math.pi + 0.05, PERIOD - 0.05, 64)])
    grid = SampleGrid(t_pts, np.linspace(-20.0, 20.0, 33))
    return make_problem(f["c"], f["T"], f["g"], f["gx"], f["h"], grid=grid)
