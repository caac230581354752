"""Duffing problem definition, config ingestion and sampled derivative bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .expr import CompiledExpr, DomainError, check_derivative, compile_expr, evaluate, parse, variables

__all__ = [
    "SchemaError",
    "ValidationError",
    "SampleGrid",
    "DuffingProblem",
    "BoundsReport",
    "load_problem",
    "make_problem",
    "default_grid",
    "sample_bounds",
    "PERIODICITY_RTOL",
    "parse_constant",
]

PERIODICITY_RTOL = 1e-9
DERIVATIVE_RTOL = 1e-6
PROBLEM_FIELDS = ("c", "T", "g", "gx", "h")


class SchemaError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message if not witness else f"{message} (witness: {witness})")
        self.witness = witness or {}


@dataclass(frozen=True)
class SampleGrid:
    """Finite sample of ``(t, x)`` standing in for "all t, all x" hypotheses."""

    t_points: np.ndarray
    x_points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_points, dtype=float)
        x = np.asarray(self.x_points, dtype=float)
        for name, pts in (("t_points", t), ("x_points", x)):
            if pts.ndim != 1 or pts.size == 0:
                raise ValueError(f"{name} must be a nonempty 1-d list")
            if pts.size > 1 and not np.all(np.diff(pts) > 0):
                raise ValueError(f"{name} must be strictly increasing")
            if not np.all(np.isfinite(pts)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "t_points", t)
        object.__setattr__(self, "x_points", x)

    @classmethod
    def uniform(cls, T: float, t_count: int = 256, x_range=(-20.0, 20.0), x_count: int = 256) -> "SampleGrid":
        return cls(np.linspace(0.0, T, t_count), np.linspace(x_range[0], x_range[1], x_count))

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x_points[0]), float(self.x_points[-1])

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.t_points[0]), float(self.t_points[-1])

    def describe(self) -> dict:
        return {
            "t_points": int(self.t_points.size),
            "t_range": list(self.t_range),
            "x_points": int(self.x_points.size),
            "x_range": list(self.x_range),
        }


def default_grid(T: float) -> SampleGrid:
    return SampleGrid.uniform(T)


@dataclass(frozen=True)
class DuffingProblem:
    """``x'' + c x' + g(t, x) = h(t)`` with T-periodic ``g`` and ``h``.

    Build through :func:`load_problem` or :func:`make_problem`, which run the
    load-time checks; the constructor itself only checks signs.
    """

    c: float
    T: float
    g: CompiledExpr
    gx: CompiledExpr
    h: CompiledExpr

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValidationError("c must be positive")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValidationError("T must be positive")

    @property
    def autonomous(self) -> bool:
        """True when ``g`` does not depend on ``t``."""
        return "t" not in self.g.variables

    def ladder(self, n: int) -> float:
        """``n**2 pi**2 / T**2 + c**2/4``, the n-th eigenvalue of the weighted BVP."""
        return (n * math.pi / self.T) ** 2 + self.c**2 / 4.0

    def describe(self) -> dict:
        return {"c": self.c, "T": self.T, "g": self.g.source, "gx": self.gx.source, "h": self.h.source}


def parse_constant(value: Any, name: str) -> float:
    if isinstance(value, bool):
        raise SchemaError(f"{name} must be a number or expression string")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        e = parse(value)
        if variables(e):
            raise ValidationError(f"{name} must be a constant expression")
        return evaluate(e, 0.0, 0.0)
    raise SchemaError(f"{name} must be a number or expression string")


def _expression(value: Any, name: str) -> CompiledExpr:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = repr(value)
    if not isinstance(value, str):
        raise SchemaError(f"{name} must be an expression string")
    return compile_expr(value)


def _check_periodic(f: CompiledExpr, name: str, T: float, grid: SampleGrid) -> None:
    tt, xx = np.meshgrid(grid.t_points, grid.x_points, indexing="ij")
    now = f.vectorized(tt, xx)
    later = f.vectorized(tt + T, xx)
    bad = np.abs(later - now) > PERIODICITY_RTOL * (1.0 + np.abs(now))
    if bad.any():
        k = int(np.argmax(bad))
        raise ValidationError(
            f"{name} is not T-periodic on samples",
            {"t": float(tt.flat[k]), "x": float(xx.flat[k]), "value": float(now.flat[k]), "value_at_t_plus_T": float(later.flat[k])},
        )


def make_problem(c, T, g: str, gx: str, h: str, grid: SampleGrid | None = None) -> DuffingProblem:
    """Build and validate a problem from scalar fields and expression strings."""
    c_val = parse_constant(c, "c")
    T_val = parse_constant(T, "T")
    if not c_val > 0:
        raise ValidationError("c must be positive")
    if not T_val > 0:
        raise ValidationError("T must be positive")
    g_e, gx_e, h_e = _expression(g, "g"), _expression(gx, "gx"), _expression(h, "h")
    if "x" in h_e.variables:
        raise ValidationError("h must depend on t only")
    p = DuffingProblem(c_val, T_val, g_e, gx_e, h_e)
    validate(p, grid)
    return p


def validate(p: DuffingProblem, grid: SampleGrid | None = None) -> None:
    """Run the load-time checks: sampled periodicity and derivative consistency."""
    grid = grid if grid is not None else default_grid(p.T)
    try:
        _check_periodic(p.g, "g", p.T, grid)
        _check_periodic(p.gx, "gx", p.T, grid)
        _check_periodic(p.h, "h", p.T, SampleGrid(grid.t_points, np.zeros(1)))
        tt, xx = np.meshgrid(grid.t_points, grid.x_points, indexing="ij")
        scale = float(np.max(np.abs(p.gx.vectorized(tt, xx))))
    except DomainError as err:
        raise ValidationError(f"expression leaves its domain on samples: {err}", {"t": err.t, "x": err.x}) from err
    report = check_derivative(p.g, p.gx, grid, DERIVATIVE_RTOL * (1.0 + scale))
    if not report.passed:
        raise ValidationError(
            "gx does not match the finite-difference derivative of g",
            {"t": report.worst_t, "x": report.worst_x, "mismatch": report.max_mismatch},
        )


def load_problem(config: Mapping[str, Any], grid: SampleGrid | None = None) -> DuffingProblem:
    """Validate the ``problem`` section of a run config.

    ``config`` is either the whole document (with a ``problem`` key) or the
    ``problem`` mapping itself.
    """
    if not isinstance(config, Mapping):
        raise SchemaError("problem config must be an object")
    doc = config["problem"] if "problem" in config else config
    if not isinstance(doc, Mapping):
        raise SchemaError("problem config must be an object")
    missing = [k for k in PROBLEM_FIELDS if k not in doc]
    extra = [k for k in doc if k not in PROBLEM_FIELDS]
    if missing:
        raise SchemaError(f"problem is missing field(s): {', '.join(missing)}")
    if extra:
        raise SchemaError(f"problem has unknown field(s): {', '.join(extra)}")
    return make_problem(doc["c"], doc["T"], doc["g"], doc["gx"], doc["h"], grid)


@dataclass(frozen=True)
class BoundsReport:
    """Sampled envelope of ``gx``: ``alpha_hat(t) = max_x gx``, ``beta_hat(t) = min_x gx``."""

    t_points: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    global_max: float
    global_min: float
    beta_integral: float
    argmax: tuple[float, float] = field(default=(math.nan, math.nan))
    argmin: tuple[float, float] = field(default=(math.nan, math.nan))


def sample_bounds(p: DuffingProblem, grid: SampleGrid) -> BoundsReport:
    tt, xx = np.meshgrid(grid.t_points, grid.x_points, indexing="ij")
    values = p.gx.vectorized(tt, xx)
    alpha = values.max(axis=1)
    beta = values.min(axis=1)
    kmax = int(np.argmax(values))
    kmin = int(np.argmin(values))
    if grid.t_points.size > 1:
        beta_integral = float(np.trapezoid(beta, grid.t_points))
    else:
        beta_integral = 0.0
    return BoundsReport(
        t_points=grid.t_points,
        alpha_hat=alpha,
        beta_hat=beta,
        global_max=float(values.flat[kmax]),
        global_min=float(values.flat[kmin]),
        beta_integral=beta_integral,
        argmax=(float(tt.flat[kmax]), float(xx.flat[kmax])),
        argmin=(float(tt.flat[kmin]), float(xx.flat[kmin])),
    )
