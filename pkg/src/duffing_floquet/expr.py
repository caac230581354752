"""Tiny arithmetic expression language over the variables ``t`` and ``x``.

Users write the restoring force ``g(t, x)``, its derivative ``gx(t, x)``
and the forcing ``h(t)`` as strings such as ``"2*x + 0.5*atan(x)"``.
Expressions parse into an immutable tree, which can be evaluated directly
(:func:`evaluate`) or compiled into fast scalar and numpy callables
(:func:`compile_expr`).

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := number | "pi" | "t" | "x" | func "(" expr ")" | "(" expr ")"

Evaluation that leaves the reals raises :class:`DomainError`; NaNs are never
produced silently.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Union

import numpy as np

if TYPE_CHECKING:
    from .problem import SampleGrid

__all__ = [
    "Constant",
    "Var",
    "Unary",
    "Binary",
    "Expr",
    "ParseError",
    "ExprSyntaxError",
    "UnknownIdentifier",
    "DomainError",
    "parse",
    "evaluate",
    "to_source",
    "variables",
    "compile_expr",
    "CompiledExpr",
    "ConsistencyReport",
    "check_derivative",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs", "atan", "tanh")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
MAX_DEPTH = 64


# Tree ------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "x"


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Constant, Var, Unary, Binary]


# Errors ----------------------------------------------------------------------


class ParseError(ValueError):
    """Base class for everything :func:`parse` raises."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ExprSyntaxError(ParseError):
    def __init__(self, offset: int, expected: str, found: str):
        super().__init__(f"expected {expected}, found {found}", offset)
        self.expected = expected
        self.found = found


class UnknownIdentifier(ParseError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class DomainError(ArithmeticError):
    """Evaluation left the reals.

    Carries the offending sub-expression and the ``(t, x)`` inputs at which
    the whole expression was being evaluated.
    """

    def __init__(self, node: Expr, t: float, x: float, reason: str):
        super().__init__(f"{reason} in {to_source(node)!s} at t={t!r}, x={x!r}")
        self.node = node
        self.t = t
        self.x = x
        self.reason = reason


# Parser ----------------------------------------------------------------------

_NUMBER = re.compile(rb"[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?")
_IDENT = re.compile(rb"[A-Za-z_][A-Za-z0-9_]*")
_SPACE = b" \t\r\n"


class _Parser:
    def __init__(self, src: bytes):
        self.src = src
        self.pos = 0
        self.nest = 0

    def _skip(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos] in _SPACE:
            self.pos += 1

    def _peek(self) -> bytes:
        self._skip()
        return self.src[self.pos : self.pos + 1]

    def _found(self) -> str:
        ch = self._peek()
        if not ch:
            return "end of input"
        return repr(ch.decode("latin-1"))

    def _expect(self, ch: bytes) -> None:
        if self._peek() != ch:
            raise ExprSyntaxError(self.pos, f'"{ch.decode()}"', self._found())
        self.pos += 1

    def _check_depth(self, depth: int) -> None:
        if depth > MAX_DEPTH:
            raise ParseError(f"expression nests deeper than {MAX_DEPTH}", self.pos)

    def _enter(self) -> None:
        self.nest += 1
        self._check_depth(self.nest)

    # Each rule returns (node, depth).

    def parse(self) -> Expr:
        node, _ = self.expr()
        if self._peek():
            raise ExprSyntaxError(self.pos, "operator or end of input", self._found())
        return node

    def expr(self) -> tuple[Expr, int]:
        left, depth = self.term()
        while self._peek() in (b"+", b"-"):
            op = "add" if self._peek() == b"+" else "sub"
            self.pos += 1
            right, rdepth = self.term()
            depth = 1 + max(depth, rdepth)
            self._check_depth(depth)
            left = Binary(op, left, right)
        return left, depth

    def term(self) -> tuple[Expr, int]:
        left, depth = self.unary()
        while self._peek() in (b"*", b"/"):
            op = "mul" if self._peek() == b"*" else "div"
            self.pos += 1
            right, rdepth = self.unary()
            depth = 1 + max(depth, rdepth)
            self._check_depth(depth)
            left = Binary(op, left, right)
        return left, depth

    def unary(self) -> tuple[Expr, int]:
        n_neg = 0
        while self._peek() == b"-":
            self.pos += 1
            n_neg += 1
        self._check_depth(n_neg)
        node, depth = self.power()
        for _ in range(n_neg):
            node = Unary("neg", node)
        depth += n_neg
        self._check_depth(depth)
        return node, depth

    def power(self) -> tuple[Expr, int]:
        base, depth = self.atom()
        if self._peek() == b"^":
            self.pos += 1
            self._enter()
            exponent, edepth = self.unary()
            self.nest -= 1
            depth = 1 + max(depth, edepth)
            self._check_depth(depth)
            base = Binary("pow", base, exponent)
        return base, depth

    def atom(self) -> tuple[Expr, int]:
        ch = self._peek()
        start = self.pos
        if ch == b"(":
            self.pos += 1
            self._enter()
            node, depth = self.expr()
            self._expect(b")")
            self.nest -= 1
            return node, depth
        m = _NUMBER.match(self.src, self.pos)
        if m:
            value = float(m.group().decode())
            if not math.isfinite(value):
                raise ParseError("numeric literal out of range", start)
            self.pos = m.end()
            return Constant(value), 0
        m = _IDENT.match(self.src, self.pos)
        if m:
            name = m.group().decode()
            self.pos = m.end()
            if name in ("t", "x"):
                return Var(name), 0
            if name == "pi":
                return Constant(math.pi), 0
            if name in FUNCTIONS:
                self._expect(b"(")
                self._enter()
                arg, depth = self.expr()
                self._expect(b")")
                self.nest -= 1
                self._check_depth(depth + 1)
                return Unary(name, arg), depth + 1
            raise UnknownIdentifier(name, start)
        raise ExprSyntaxError(self.pos, "number, variable, function or \"(\"", self._found())


def parse(source: str | bytes) -> Expr:
    """Parse ``source`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with the byte offset and a description of
    the expected token) or :class:`UnknownIdentifier`.
    """
    if isinstance(source, str):
        source = source.encode("utf-8")
    return _Parser(bytes(source)).parse()


# Inspection and printing -----------------------------------------------------


def variables(e: Expr) -> set[str]:
    """Names of the variables occurring in ``e``."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return variables(e.child)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    return set()


_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 4}[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return 3
    if isinstance(e, Constant) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 0
    return 5


def to_source(e: Expr) -> str:
    """Render ``e`` back into the expression language.

    For every tree produced by :func:`parse`, ``parse(to_source(e)) == e``.
    """

    def wrap(child: Expr, min_prec: int) -> str:
        s = to_source(child)
        return s if _prec(child) >= min_prec else f"({s})"

    if isinstance(e, Constant):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + wrap(e.child, 3)
        return f"{e.op}({to_source(e.child)})"
    lo, hi = {"add": (1, 2), "sub": (1, 2), "mul": (2, 3), "div": (2, 3), "pow": (5, 3)}[e.op]
    return f"{wrap(e.left, lo)} {_INFIX[e.op]} {wrap(e.right, hi)}"


# Reference evaluator ---------------------------------------------------------


def _checked(node: Expr, t: float, x: float, fn: Callable[[], float]) -> float:
    try:
        value = fn()
    except ZeroDivisionError:
        raise DomainError(node, t, x, "division by zero") from None
    except OverflowError:
        raise DomainError(node, t, x, "overflow") from None
    except ValueError:
        raise DomainError(node, t, x, "argument outside the real domain") from None
    if not math.isfinite(value):
        raise DomainError(node, t, x, "non-finite result")
    return value


def evaluate(e: Expr, t: float, x: float = 0.0) -> float:
    """Evaluate ``e`` at ``(t, x)`` with real arithmetic."""

    def ev(node: Expr) -> float:
        if isinstance(node, Constant):
            return float(node.value)
        if isinstance(node, Var):
            return float(t if node.name == "t" else x)
        if isinstance(node, Unary):
            a = ev(node.child)
            op = node.op
            if op == "neg":
                return -a
            if op == "ln" and a <= 0.0:
                raise DomainError(node, t, x, "logarithm of a non-positive number")
            if op == "sqrt" and a < 0.0:
                raise DomainError(node, t, x, "square root of a negative number")
            return _checked(node, t, x, lambda: _MATH[op](a))
        a = ev(node.left)
        b = ev(node.right)
        op = node.op
        if op == "div" and b == 0.0:
            raise DomainError(node, t, x, "division by zero")
        if op == "pow":
            if a < 0.0 and b != math.floor(b):
                raise DomainError(node, t, x, "non-integer power of a negative base")
            if a == 0.0 and b < 0.0:
                raise DomainError(node, t, x, "division by zero")
        return _checked(node, t, x, lambda: _ARITH[op](a, b))

    return ev(e)


_MATH = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
    "abs": math.fabs,
    "atan": math.atan,
    "tanh": math.tanh,
}
_ARITH = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": math.pow,
}


# Compilation -----------------------------------------------------------------

_NP_FUNCS = {
    "sin": "np.sin",
    "cos": "np.cos",
    "tan": "np.tan",
    "exp": "np.exp",
    "ln": "np.log",
    "sqrt": "np.sqrt",
    "abs": "np.abs",
    "atan": "np.arctan",
    "tanh": "np.tanh",
}


def _codegen(e: Expr, consts: list[float], array: bool) -> str:
    if isinstance(e, Constant):
        if math.isfinite(e.value):
            return f"({float(e.value)!r})"
        consts.append(float(e.value))
        return f"_k{len(consts) - 1}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        a = _codegen(e.child, consts, array)
        if e.op == "neg":
            return f"(-{a})"
        return f"{_NP_FUNCS[e.op]}({a})" if array else f"_{e.op}({a})"
    a = _codegen(e.left, consts, array)
    b = _codegen(e.right, consts, array)
    if e.op == "pow":
        return f"np.power({a}, {b})" if array else f"_pow({a}, {b})"
    return f"({a} {_INFIX[e.op].replace('^', '**')} {b})"


class CompiledExpr:
    """An expression bundled with compiled scalar and vectorized evaluators.

    Calling the object evaluates at a scalar point; :meth:`vectorized`
    evaluates over broadcastable arrays. Both raise :class:`DomainError`
    exactly where :func:`evaluate` does.
    """

    def __init__(self, expr: Expr, source: str | None = None):
        self.expr = expr
        self.source = source if source is not None else to_source(expr)
        self.variables = frozenset(variables(expr))
        consts: list[float] = []
        scalar_src = _codegen(expr, consts, array=False)
        array_src = _codegen(expr, [], array=True)
        ns: dict = {f"_{name}": fn for name, fn in _MATH.items()}
        ns.update({f"_k{i}": v for i, v in enumerate(consts)})
        ns["_pow"] = math.pow
        ns["np"] = np
        exec(f"def _scalar(t, x):\n    return {scalar_src}\n", ns)
        exec(f"def _array(t, x):\n    return {array_src}\n", ns)
        self._scalar = ns["_scalar"]
        self._array = ns["_array"]

    def __repr__(self) -> str:
        return f"CompiledExpr({self.source!r})"

    def __call__(self, t: float, x: float = 0.0) -> float:
        try:
            value = self._scalar(t, x)
        except (ArithmeticError, ValueError):
            value = math.nan
        if not math.isfinite(value):
            evaluate(self.expr, t, x)
            raise DomainError(self.expr, t, x, "non-finite result")
        return value

    def vectorized(self, t, x=0.0) -> np.ndarray:
        t_arr, x_arr = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
                out = np.asarray(self._array(t_arr, x_arr), dtype=float)
            ok = bool(np.all(np.isfinite(out)))
        except FloatingPointError:
            ok = False
        if not ok:
            # locate the first offending sample so the error names it
            for tv, xv in zip(t_arr.ravel(), x_arr.ravel()):
                self(float(tv), float(xv))
            raise DomainError(self.expr, math.nan, math.nan, "non-finite result")
        return np.broadcast_to(out, t_arr.shape).copy()


def compile_expr(e: Expr | str) -> CompiledExpr:
    if isinstance(e, str):
        return CompiledExpr(parse(e), e)
    return CompiledExpr(e)


# Derivative cross-check --------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    passed: bool
    max_mismatch: float
    worst_t: float
    worst_x: float
    tol: float
    n_points: int


def check_derivative(g, gx, grid: "SampleGrid", tol: float) -> ConsistencyReport:
    """Compare a user-supplied ``gx`` against central differences of ``g``.

    The step is ``max(1e-6, 1e-6*|x|)``. Passes iff the absolute mismatch is
    at most ``tol`` at every grid point.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = g if isinstance(g, CompiledExpr) else compile_expr(g)
    gx = gx if isinstance(gx, CompiledExpr) else compile_expr(gx)
    tt, xx = np.meshgrid(np.asarray(grid.t_points, float), np.asarray(grid.x_points, float), indexing="ij")
    delta = np.maximum(1e-6, 1e-6 * np.abs(xx))
    fd = (g.vectorized(tt, xx + delta) - g.vectorized(tt, xx - delta)) / (2.0 * delta)
    mismatch = np.abs(gx.vectorized(tt, xx) - fd)
    k = int(np.argmax(mismatch))
    worst = float(mismatch.flat[k])
    return ConsistencyReport(
        passed=worst <= tol,
        max_mismatch=worst,
        worst_t=float(tt.flat[k]),
        worst_x=float(xx.flat[k]),
        tol=tol,
        n_points=mismatch.size,
    )
