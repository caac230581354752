"""Sampled checks of the hypotheses of the uniqueness/stability theorems.

Every check evaluates the hypotheses on a finite grid only. A passing report
means "satisfied on samples", never a proof; a violation comes with the
witness point that breaks it, and that witness stays valid on any finer grid
containing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .floquet import ladder, ladder_cell
from .problem import DuffingProblem, SampleGrid, sample_bounds

__all__ = [
    "Status",
    "Condition",
    "CertificateReport",
    "NotMonotone",
    "STRICT_FRACTION",
    "check_theorem1",
    "check_theorem2",
    "check_theorem3",
    "check_lemma32",
]

# "alpha << lambda" is read as: alpha <= lambda everywhere, strictly on at least this share of t samples
STRICT_FRACTION = 0.01
CRITICAL_RTOL = 1e-9
CRITICAL_RUN = 3
MEAN_POINTS = 4096

SAMPLED_LABEL = "hypotheses checked on samples only"


class Status(str, Enum):
    SATISFIED = "satisfied_on_samples"
    VIOLATED = "violated"
    NOT_APPLICABLE = "not_applicable"


class NotMonotone(ValueError):
    def __init__(self, x: float, y: float, gx: float, gy: float):
        super().__init__(f"g is not increasing on samples: g({x!r}) = {gx!r} > g({y!r}) = {gy!r}")
        self.witness = {"x": x, "y": y, "g_x": gx, "g_y": gy}


@dataclass(frozen=True)
class Condition:
    name: str
    status: Status
    detail: str
    witness: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status.value, "detail": self.detail, "witness": dict(self.witness)}


@dataclass(frozen=True)
class CertificateReport:
    theorem: str  # "T1", "T2", "T3" or "L3_2"
    n: int | None
    conditions: tuple[Condition, ...]
    predicted_conclusion: str
    grid: dict
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if bool(self.predicted_conclusion) != self.passed:
            raise ValueError("predicted_conclusion must be set exactly when every condition holds")

    @property
    def passed(self) -> bool:
        return bool(self.conditions) and all(c.status == Status.SATISFIED for c in self.conditions)

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "n": self.n,
            "passed": self.passed,
            "conditions": [c.as_dict() for c in self.conditions],
            "predicted_conclusion": self.predicted_conclusion,
            "grid": self.grid,
            "notes": list(self.notes),
        }


def _report(theorem, n, conditions, conclusion, grid, notes) -> CertificateReport:
    ok = all(c.status == Status.SATISFIED for c in conditions)
    return CertificateReport(theorem, n, tuple(conditions), conclusion if ok else "", grid, tuple(notes))


def _grid_notes(grid: SampleGrid) -> list[str]:
    lo, hi = grid.x_range
    return [SAMPLED_LABEL, f"x restricted to [{lo!r}, {hi!r}] ({grid.x_points.size} points), t to {grid.t_points.size} points"]


def check_theorem1(p: DuffingProblem, grid: SampleGrid, strict_fraction: float = STRICT_FRACTION) -> CertificateReport:
    """``sup_x gx <~ lambda_1`` pointwise in t and ``int_0^T inf_x gx dt > 0``."""
    b = sample_bounds(p, grid)
    lam1 = ladder(1, p.c, p.T)
    conditions = []

    above = b.alpha_hat > lam1
    strict = float(np.mean(b.alpha_hat < lam1))
    if above.any():
        i = int(np.argmax(b.alpha_hat - lam1))
        t = float(b.t_points[i])
        row = p.gx.vectorized(np.full(grid.x_points.shape, t), grid.x_points)
        x = float(grid.x_points[int(np.argmax(row))])
        conditions.append(
            Condition(
                "alpha-below-lambda1",
                Status.VIOLATED,
                f"sup_x gx exceeds lambda_1 = {lam1!r}",
                {"t": t, "x": x, "gx": float(b.alpha_hat[i]), "lambda_1": lam1},
            )
        )
    elif strict < strict_fraction:
        conditions.append(
            Condition(
                "alpha-below-lambda1",
                Status.VIOLATED,
                f"sup_x gx < lambda_1 on only {strict:.4g} of t samples (need {strict_fraction:g})",
                {"strict_fraction": strict, "lambda_1": lam1},
            )
        )
    else:
        conditions.append(
            Condition(
                "alpha-below-lambda1",
                Status.SATISFIED,
                f"max sup_x gx = {float(b.alpha_hat.max())!r} <= lambda_1 = {lam1!r}, strict on {strict:.4g} of t samples",
            )
        )

    # integral must clear the trapezoid rounding level to count as positive
    threshold = 1e-9 * p.T * (1.0 + float(np.max(np.abs(b.beta_hat))))
    if b.beta_integral > threshold:
        conditions.append(
            Condition("beta-integral-positive", Status.SATISFIED, f"int inf_x gx dt = {b.beta_integral!r} > {threshold:.3g}")
        )
    else:
        i = int(np.argmin(b.beta_hat))
        conditions.append(
            Condition(
                "beta-integral-positive",
                Status.VIOLATED,
                f"int inf_x gx dt = {b.beta_integral!r} is not above {threshold:.3g}",
                {"integral": b.beta_integral, "t": float(b.t_points[i]), "beta": float(b.beta_hat[i])},
            )
        )
    notes = _grid_notes(grid) + [f"'<<' proxy: strict inequality on at least {strict_fraction:g} of t samples"]
    return _report("T1", None, conditions, "unique T-periodic solution, asymptotically stable", grid.describe(), notes)


def check_theorem2(p: DuffingProblem, grid: SampleGrid) -> CertificateReport:
    """``lambda_n <= gx(t, x) <= lambda_{n+1}`` on all samples for some ``n >= 1``."""
    b = sample_bounds(p, grid)
    n = ladder_cell(b.global_min, b.global_max, p.c, p.T)
    lo_t, lo_x = b.argmin
    hi_t, hi_x = b.argmax
    if n is not None:
        cond = Condition(
            "gx-in-ladder-cell",
            Status.SATISFIED,
            f"gx in [{b.global_min!r}, {b.global_max!r}] within [lambda_{n}, lambda_{n + 1}] = "
            f"[{ladder(n, p.c, p.T)!r}, {ladder(n + 1, p.c, p.T)!r}]",
        )
    else:
        # the rung strictly inside the sampled range is what breaks containment
        k = max(1, math.floor(p.T / math.pi * math.sqrt(max(b.global_min - p.c**2 / 4.0, 0.0))))
        cond = Condition(
            "gx-in-ladder-cell",
            Status.VIOLATED,
            f"gx range [{b.global_min!r}, {b.global_max!r}] fits no ladder cell with n >= 1",
            {
                "min": {"t": lo_t, "x": lo_x, "gx": b.global_min},
                "max": {"t": hi_t, "x": hi_x, "gx": b.global_max},
                "nearest_rungs": [ladder(k, p.c, p.T), ladder(k + 1, p.c, p.T)],
            },
        )
    return _report(
        "T2", n, [cond], "unique T-periodic solution, stable with rate of decay c/2", grid.describe(), _grid_notes(grid)
    )


def _secant_slopes(p: DuffingProblem, xs: np.ndarray):
    gv = p.g.vectorized(np.zeros_like(xs), xs)
    i, j = np.triu_indices(xs.size, k=1)
    return (gv[j] - gv[i]) / (xs[j] - xs[i]), i, j


def _derivative_samples(p: DuffingProblem, t: np.ndarray) -> np.ndarray:
    d = 1e-6 * p.T
    return (p.h.vectorized(t + d, np.zeros_like(t)) - p.h.vectorized(t - d, np.zeros_like(t))) / (2.0 * d)


def check_theorem3(p: DuffingProblem, grid: SampleGrid, secant_grid=None) -> CertificateReport:
    """Secant slopes of an autonomous ``g`` in one ladder cell; critical set of ``h`` null."""
    notes = _grid_notes(grid) + ["n >= 1 is required here as in the derivative-bound theorem"]
    if not p.autonomous:
        cond = Condition("g-autonomous", Status.NOT_APPLICABLE, "g depends on t; the secant criterion needs g = g(x)")
        return _report("T3", None, [cond], "", grid.describe(), notes)

    xs = np.asarray(secant_grid if secant_grid is not None else grid.x_points, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or not np.all(np.diff(xs) > 0):
        raise ValueError("secant_grid must be a strictly increasing list of at least 2 points")
    slopes, i, j = _secant_slopes(p, xs)
    lo, hi = float(slopes.min()), float(slopes.max())
    n = ladder_cell(lo, hi, p.c, p.T)
    conditions = []
    if n is not None:
        conditions.append(
            Condition(
                "secants-in-ladder-cell",
                Status.SATISFIED,
                f"secant slopes in [{lo!r}, {hi!r}] within [lambda_{n}, lambda_{n + 1}]",
            )
        )
    else:
        k = int(np.argmax(slopes)) if hi > ladder(1, p.c, p.T) else int(np.argmin(slopes))
        conditions.append(
            Condition(
                "secants-in-ladder-cell",
                Status.VIOLATED,
                f"secant slopes span [{lo!r}, {hi!r}], which fits no ladder cell with n >= 1",
                {"x": float(xs[i[k]]), "y": float(xs[j[k]]), "slope": float(slopes[k])},
            )
        )

    dh = _derivative_samples(p, grid.t_points)
    scale = float(np.max(np.abs(dh)))
    near = np.abs(dh) <= CRITICAL_RTOL * scale
    # longest run of consecutive near-zero samples
    run, longest, start, best_start = 0, 0, 0, 0
    for k, flag in enumerate(near):
        if flag:
            if run == 0:
                start = k
            run += 1
            if run > longest:
                longest, best_start = run, start
        else:
            run = 0
    signs = np.sign(dh[~near])
    crossings = int(np.count_nonzero(signs[1:] != signs[:-1])) if signs.size > 1 else 0
    zeros = crossings + int(np.count_nonzero(near))
    if longest >= CRITICAL_RUN:
        conditions.append(
            Condition(
                "critical-set-null",
                Status.VIOLATED,
                f"h' vanishes on {longest} consecutive t samples (plateau)",
                {"t_start": float(grid.t_points[best_start]), "run": longest, "max_abs_h_prime": scale},
            )
        )
    else:
        conditions.append(
            Condition("critical-set-null", Status.SATISFIED, f"h' has {zeros} isolated zero(s) on the t samples")
        )
    return _report("T3", n, conditions, "unique T-periodic solution, stable with rate of decay c/2", grid.describe(), notes)


def check_lemma32(p: DuffingProblem, x_range=(-20.0, 20.0), x_points: int = MEAN_POINTS) -> CertificateReport:
    """Existence iff the mean forcing lies in the range of an increasing ``g``.

    Raises :class:`NotMonotone` if ``g`` decreases between two samples.
    """
    lo, hi = float(x_range[0]), float(x_range[1])
    if not hi > lo:
        raise ValueError("x_range must be a nonempty interval")
    desc = {"x_range": [lo, hi], "x_points": x_points, "t_points": MEAN_POINTS}
    notes = [SAMPLED_LABEL, f"range of g estimated on [{lo!r}, {hi!r}]", "friction f(x) = c, so |f| >= k holds with k = c"]
    if not p.autonomous:
        cond = Condition("g-autonomous", Status.NOT_APPLICABLE, "g depends on t")
        return _report("L3_2", None, [cond], "", desc, notes)
    xs = np.linspace(lo, hi, x_points)
    gv = p.g.vectorized(np.zeros_like(xs), xs)
    drops = np.flatnonzero(np.diff(gv) < 0)
    if drops.size:
        k = int(drops[0])
        raise NotMonotone(float(xs[k]), float(xs[k + 1]), float(gv[k]), float(gv[k + 1]))
    t = np.linspace(0.0, p.T, MEAN_POINTS)
    h_mean = float(np.trapezoid(p.h.vectorized(t, np.zeros_like(t)), t) / p.T)
    g_lo, g_hi = float(gv[0]), float(gv[-1])
    witness = {"h_mean": h_mean, "g_lo": g_lo, "g_hi": g_hi}
    if g_lo < h_mean < g_hi:
        cond = Condition("mean-forcing-in-range", Status.SATISFIED, f"h_mean = {h_mean!r} in ({g_lo!r}, {g_hi!r})", witness)
    else:
        cond = Condition(
            "mean-forcing-in-range", Status.VIOLATED, f"h_mean = {h_mean!r} outside ({g_lo!r}, {g_hi!r})", witness
        )
    return _report("L3_2", None, [cond], "a T-periodic solution exists", desc, notes)
