"""Command-line front end.

    duffing-floquet <solve|certify|scan-hill|decay> --config FILE
                    [--set key=value]... [--output FILE] [--format json|csv|text]

Exit codes: 0 success, 1 config or validation error, 2 no convergence,
3 singular Jacobian, 4 Hill scan range too coarse, 5 decay estimate
diverged, 6 too few usable decay points.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .certify import CertificateReport, Condition, NotMonotone, Status, check_lemma32, check_theorem1, check_theorem2, check_theorem3
from .decay import Diverged, InsufficientPoints, estimate_decay
from .expr import DomainError, ParseError
from .floquet import FloquetSpectrum, check_lemma_bounds, spectrum
from .hill import RangeTooCoarse, boundary_scan, scan_grid
from .odeint import IntegrationError, IntegratorSettings
from .periodic import NoConvergence, PeriodicOrbit, ShootingSettings, SingularJacobian, find_periodic, gx_along_orbit, start_grid, uniqueness_probe
from .problem import SampleGrid, SchemaError, ValidationError, parse_constant, load_problem

__all__ = ["main", "run", "dumps", "ConfigError", "EXIT_CODES"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_SINGULAR = 3
EXIT_RANGE = 4
EXIT_DIVERGED = 5
EXIT_INSUFFICIENT = 6

EXIT_CODES = {
    "ok": EXIT_OK,
    "config": EXIT_CONFIG,
    "no_convergence": EXIT_NO_CONVERGENCE,
    "singular_jacobian": EXIT_SINGULAR,
    "range_too_coarse": EXIT_RANGE,
    "diverged": EXIT_DIVERGED,
    "insufficient_points": EXIT_INSUFFICIENT,
}

COMMANDS = ("solve", "certify", "scan-hill", "decay")
SECTIONS = {
    "problem": None,
    "grid": {"t_points", "x_points", "x_range"},
    "integrator": {"rel_tol", "abs_tol"},
    "solve": {"guess", "start_grid", "tol", "max_iter"},
    "certify": {"theorems"},
    "scan_hill": {"c", "eps", "w_range", "resolution"},
    "decay": {"delta", "horizon"},
    "output": {"format", "path"},
}
THEOREMS = ("T1", "T2", "T3", "L3.2")


class ConfigError(ValueError):
    pass


class _Failure(Exception):
    # a report worth printing plus a nonzero exit code
    def __init__(self, code: int, payload: dict, message: str):
        super().__init__(message)
        self.code = code
        self.payload = payload


# ---------------------------------------------------------------- output


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy scalars/arrays, complex numbers and enums to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    return obj


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON with every float written to 17 significant digits."""
    out = io.StringIO()

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if v is None:
            out.write("null")
        elif v is True or v is False:
            out.write("true" if v else "false")
        elif isinstance(v, int):
            out.write(str(v))
        elif isinstance(v, float):
            out.write(_num(v))
        elif isinstance(v, str):
            out.write(json.dumps(v, ensure_ascii=False))
        elif isinstance(v, dict):
            if not v:
                out.write("{}")
                return
            out.write("{\n")
            for i, (k, item) in enumerate(v.items()):
                out.write(f"{pad}{json.dumps(k)}: ")
                emit(item, level + 1)
                out.write(",\n" if i < len(v) - 1 else "\n")
            out.write(end + "}")
        elif isinstance(v, list):
            if not v:
                out.write("[]")
                return
            if all(isinstance(item, (int, float)) and not isinstance(item, bool) for item in v):
                out.write("[" + ", ".join(_num(item) if isinstance(item, float) else str(item) for item in v) + "]")
                return
            out.write("[\n")
            for i, item in enumerate(v):
                out.write(pad)
                emit(item, level + 1)
                out.write(",\n" if i < len(v) - 1 else "\n")
            out.write(end + "]")
        else:
            raise TypeError(f"cannot serialize {type(v).__name__}")

    emit(_plain(obj), 0)
    out.write("\n")
    return out.getvalue()


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- config


def _set_path(doc: dict, dotted: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    if not all(keys):
        raise ConfigError(f"bad --set path {dotted!r}")
    node = doc
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = node[k] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {dotted}: {k!r} is not an object")
        node = nxt
    node[keys[-1]] = value


def load_config(path: str, overrides=()) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        _set_path(doc, key.strip(), raw)
    for name, value in doc.items():
        if name not in SECTIONS:
            raise ConfigError(f"unknown config section {name!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"section {name!r} must be an object")
        allowed = SECTIONS[name]
        if allowed is not None:
            extra = sorted(set(value) - allowed)
            if extra:
                raise ConfigError(f"unknown field(s) in {name!r}: {', '.join(extra)}")
    return doc


def _int(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}")
    return value


def _float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number")
    return float(value)


def _pair(value, name: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a list of two numbers")
    return _float(value[0], name), _float(value[1], name)


def _grid(doc: dict, T: float) -> SampleGrid:
    g = doc.get("grid", {})
    t_count = _int(g.get("t_points", 256), "grid.t_points", 1)
    x_count = _int(g.get("x_points", 256), "grid.x_points", 2)
    lo, hi = _pair(g.get("x_range", [-20.0, 20.0]), "grid.x_range")
    if not hi > lo:
        raise ConfigError("grid.x_range must satisfy lo < hi")
    return SampleGrid.uniform(T, t_count, (lo, hi), x_count)


def _integrator(doc: dict) -> IntegratorSettings:
    s = doc.get("integrator", {})
    return IntegratorSettings(
        rel_tol=_float(s.get("rel_tol", 1e-10), "integrator.rel_tol"),
        abs_tol=_float(s.get("abs_tol", 1e-10), "integrator.abs_tol"),
    )


def _shooting(doc: dict) -> ShootingSettings:
    s = doc.get("solve", {})
    return ShootingSettings(
        tol=_float(s.get("tol", 1e-10), "solve.tol"),
        max_iter=_int(s.get("max_iter", 50), "solve.max_iter", 0),
        integrator=_integrator(doc),
    )


def _problem(doc: dict):
    """Problem plus the sample grid from the ``grid`` section; the grid also drives the load-time checks."""
    if "problem" not in doc:
        raise ConfigError("config has no 'problem' section")
    T = parse_constant(doc["problem"]["T"], "T") if "T" in doc["problem"] else math.nan
    grid = _grid(doc, T) if T > 0 else None
    return load_problem(doc["problem"], grid), grid


# ---------------------------------------------------------------- reports


def _spectrum_dict(sp: FloquetSpectrum) -> dict:
    return {
        "multipliers": [sp.rho1, sp.rho2],
        "moduli": [abs(sp.rho1), abs(sp.rho2)],
        "exponents": [sp.lambda1, sp.lambda2],
        "pair_class": sp.pair_class,
        "verdict": sp.verdict,
        "decay_rate": sp.decay_rate,
    }


def _orbit_dict(p, orbit: PeriodicOrbit) -> dict:
    sp = spectrum(orbit.monodromy)
    gmin, gmax, gmean = gx_along_orbit(p, orbit)
    return {
        "s0": [orbit.s0.x, orbit.s0.v],
        "residual": orbit.residual,
        "iterations": orbit.iterations,
        "monodromy": orbit.monodromy.m,
        "det": orbit.monodromy.det,
        "det_expected": math.exp(-p.c * p.T),
        **_spectrum_dict(sp),
        "lemma": check_lemma_bounds(p, (gmin, gmax), gmean).as_dict(),
    }


def _solve_orbits(p, doc: dict):
    """Orbits for the ``solve`` section: one from ``guess`` or clusters from ``start_grid``."""
    s = doc.get("solve", {})
    settings = _shooting(doc)
    if "guess" in s and "start_grid" in s:
        raise ConfigError("solve takes either 'guess' or 'start_grid', not both")
    if "start_grid" in s:
        sg = s["start_grid"]
        if not isinstance(sg, dict) or set(sg) - {"range", "n"}:
            raise ConfigError("solve.start_grid must be {'range': [[x_lo, x_hi], [v_lo, v_hi]], 'n': int}")
        rng = sg.get("range")
        if not isinstance(rng, list) or len(rng) != 2:
            raise ConfigError("solve.start_grid.range must be [[x_lo, x_hi], [v_lo, v_hi]]")
        (xl, xh), (vl, vh) = _pair(rng[0], "start_grid.range"), _pair(rng[1], "start_grid.range")
        n = _int(sg.get("n", 5), "solve.start_grid.n", 1)
        probe = uniqueness_probe(p, start_grid((xl, vl), (xh, vh), n), settings)
        meta = {"mode": "start_grid", "starts": n * n, "converged": probe.n_converged, "failures": len(probe.failures)}
        if not probe.clusters:
            errs = [e for _, e in probe.failures]
            code = EXIT_SINGULAR if errs and all(isinstance(e, SingularJacobian) for e in errs) else EXIT_NO_CONVERGENCE
            reasons = sorted({str(getattr(e, "reason", type(e).__name__)) for e in errs})
            raise _Failure(code, {**meta, "reasons": reasons}, f"no start converged ({len(errs)} failures)")
        return [(cl.orbit, cl.count) for cl in probe.clusters], meta, settings
    guess = _pair(s.get("guess", [0.0, 0.0]), "solve.guess")
    try:
        orbit = find_periodic(p, guess, settings)
    except NoConvergence as err:
        raise _Failure(
            EXIT_NO_CONVERGENCE,
            {"mode": "guess", "guess": list(guess), "reason": err.reason, "iterations": err.iterations, "residual": err.residual, "state": list(err.state)},
            str(err),
        ) from err
    except SingularJacobian as err:
        raise _Failure(EXIT_SINGULAR, {"mode": "guess", "guess": list(guess), "state": list(err.state), "det": err.det}, str(err)) from err
    return [(orbit, 1)], {"mode": "guess", "guess": list(guess)}, settings


def cmd_solve(doc: dict) -> tuple[dict, dict]:
    p, _ = _problem(doc)
    found, meta, _ = _solve_orbits(p, doc)
    orbits = [{**_orbit_dict(p, orbit), "count": count} for orbit, count in found]
    payload = {"command": "solve", "problem": p.describe(), **meta, "orbits": orbits}
    first = found[0][0]
    chart = ("t,x,v", first.samples)
    return payload, {"chart": chart}


def _lemma32_report(p, grid: SampleGrid) -> CertificateReport:
    try:
        return check_lemma32(p, grid.x_range)
    except NotMonotone as err:
        cond = Condition("g-increasing", Status.VIOLATED, str(err), err.witness)
        return CertificateReport("L3_2", None, (cond,), "", {"x_range": list(grid.x_range)}, ("hypotheses checked on samples only",))


def cmd_certify(doc: dict) -> tuple[dict, dict]:
    p, grid = _problem(doc)
    wanted = doc.get("certify", {}).get("theorems", list(THEOREMS))
    if not isinstance(wanted, list) or not wanted or any(t not in THEOREMS for t in wanted):
        raise ConfigError(f"certify.theorems must be a nonempty list drawn from {list(THEOREMS)}")
    reports = []
    for name in wanted:
        if name == "T1":
            reports.append(check_theorem1(p, grid))
        elif name == "T2":
            reports.append(check_theorem2(p, grid))
        elif name == "T3":
            reports.append(check_theorem3(p, grid, grid.x_points))
        else:
            reports.append(_lemma32_report(p, grid))
    payload = {"command": "certify", "problem": p.describe(), "reports": [r.as_dict() for r in reports]}
    return payload, {}


def cmd_scan_hill(doc: dict) -> tuple[dict, dict]:
    s = doc.get("scan_hill")
    if s is None:
        raise ConfigError("config has no 'scan_hill' section")
    c = _float(s.get("c", 0.0), "scan_hill.c")
    if c < 0:
        raise ConfigError("scan_hill.c must be nonnegative")
    eps_list = s.get("eps")
    if not isinstance(eps_list, list) or not eps_list:
        raise ConfigError("scan_hill.eps must be a nonempty list")
    eps_list = [_float(e, "scan_hill.eps") for e in eps_list]
    if "w_range" not in s:
        raise ConfigError("scan_hill.w_range is required")
    w_range = _pair(s["w_range"], "scan_hill.w_range")
    if not w_range[1] > w_range[0]:
        raise ConfigError("scan_hill.w_range is empty")
    resolution = _int(s.get("resolution", 2000), "scan_hill.resolution", 2)
    rows, tongues = [], []
    for eps in eps_list:
        if eps < 0:
            raise ConfigError("scan_hill.eps values must be nonnegative")
        w, tr = scan_grid(eps, w_range, resolution)
        rows.extend((float(wi), eps, float(ti), bool(abs(ti) < 2.0)) for wi, ti in zip(w, tr))
        try:
            found = boundary_scan(eps, w_range, resolution)
        except RangeTooCoarse as err:
            raise _Failure(EXIT_RANGE, {"center": err.center, "eps": eps, "crossings": err.found}, str(err)) from err
        for b in found:
            tongues.append(
                {
                    "center": b.center,
                    "label": b.label,
                    "eps": b.eps,
                    "w_lower": b.w_lower,
                    "w_upper": b.w_upper,
                    "width": b.width,
                    "w_asymptotic_lower": b.w_asymptotic_lower,
                    "w_asymptotic_upper": b.w_asymptotic_upper,
                }
            )
    payload = {
        "command": "scan-hill",
        "c": c,
        "w_range": list(w_range),
        "resolution": resolution,
        "boundaries": tongues,
        "grid": [{"w": r[0], "eps": r[1], "tr_a": r[2], "stable": r[3]} for r in rows],
    }
    return payload, {"rows": rows, "boundaries": tongues}


def cmd_decay(doc: dict) -> tuple[dict, dict]:
    p, _ = _problem(doc)
    d = doc.get("decay", {})
    horizon = d.get("horizon", 20)
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ConfigError("decay.horizon must be an integer")
    if horizon < 5:
        raise ConfigError("horizon must be >= 5")
    delta = _pair(d["delta"], "decay.delta") if "delta" in d else None
    found, meta, settings = _solve_orbits(p, doc)
    orbit = found[0][0]
    sp = spectrum(orbit.monodromy)
    base = {"command": "decay", "problem": p.describe(), "s0": [orbit.s0.x, orbit.s0.v], "spectrum": _spectrum_dict(sp)}
    try:
        est = estimate_decay(p, orbit, delta, horizon, settings)
    except Diverged as err:
        raise _Failure(EXIT_DIVERGED, {**base, "error": str(err)}, str(err)) from err
    except InsufficientPoints as err:
        raise _Failure(EXIT_INSUFFICIENT, {**base, "error": str(err)}, str(err)) from err
    payload = {
        **base,
        "rate": est.rate,
        "r_squared": est.r_squared,
        "stderr": est.stderr,
        "spectrum_rate": -math.log(sp.max_modulus) / p.T,
        "perturbation": [est.perturbation.x, est.perturbation.v],
        "horizon": est.horizon,
        "points": [{"kT": float(a), "ln_d": float(b)} for a, b in est.points],
    }
    return payload, {"points": est.points}


HANDLERS = {"solve": cmd_solve, "certify": cmd_certify, "scan-hill": cmd_scan_hill, "decay": cmd_decay}


# ---------------------------------------------------------------- rendering


def _render_csv(command: str, payload: dict, extra: dict) -> str:
    if command == "solve":
        header, samples = extra["chart"]
        return _csv(header.split(","), samples.tolist())
    if command == "certify":
        rows = [
            (r["theorem"], "" if r["n"] is None else r["n"], c["name"], c["status"], c["detail"])
            for r in payload["reports"]
            for c in r["conditions"]
        ]
        return _csv(["theorem", "n", "condition", "status", "detail"], rows)
    if command == "scan-hill":
        rows = [(w, eps, tr, "true" if st else "false") for w, eps, tr, st in extra["rows"]]
        return _csv(["w", "eps", "tr_a", "stable"], rows)
    return _csv(["kT", "ln_d"], extra["points"].tolist())


def _boundary_csv(tongues) -> str:
    keys = ["center", "eps", "w_lower", "w_upper", "w_asymptotic_lower", "w_asymptotic_upper"]
    return _csv(keys, [[float(t[k]) for k in keys] for t in tongues])


def _fmt(x) -> str:
    return "nan" if x is None else format(float(x), ".10g")


def _render_text(command: str, payload: dict) -> str:
    lines = [f"# {command}"]
    if "problem" in payload:
        pr = payload["problem"]
        lines.append(f"problem: x'' + {_fmt(pr['c'])} x' + [{pr['g']}] = {pr['h']},  T = {_fmt(pr['T'])}")
    if command == "solve":
        if payload["mode"] == "start_grid":
            lines.append(f"starts: {payload['starts']}, converged: {payload['converged']}, failures: {payload['failures']}")
        for i, o in enumerate(payload["orbits"]):
            r1, r2 = o["multipliers"]
            lines.append(f"orbit {i}: s0 = ({_fmt(o['s0'][0])}, {_fmt(o['s0'][1])})  residual {o['residual']:.2e}  starts {o['count']}")
            lines.append(f"  multipliers: {r1.real:.10g}{r1.imag:+.10g}i, {r2.real:.10g}{r2.imag:+.10g}i  |rho| = {_fmt(max(o['moduli']))}")
            lines.append(f"  {o['pair_class'].value}, {o['verdict'].value}, decay rate {_fmt(o['decay_rate'])}")
            lines.append(f"  lemma regime {o['lemma']['regime']}: {o['lemma']['expectation']}")
    elif command == "certify":
        for r in payload["reports"]:
            head = f"{r['theorem']}" + (f" (n={r['n']})" if r["n"] is not None else "")
            lines.append(f"{head}: {'PASSED on samples' if r['passed'] else 'not certified'}")
            for c in r["conditions"]:
                lines.append(f"  [{c['status']}] {c['name']}: {c['detail']}")
            if r["predicted_conclusion"]:
                lines.append(f"  predicted: {r['predicted_conclusion']}")
            for note in r["notes"]:
                lines.append(f"  note: {note}")
    elif command == "scan-hill":
        lines.append(f"{len(payload['grid'])} grid points, {sum(g['stable'] for g in payload['grid'])} stable")
        lines.append(f"{'center':>8} {'eps':>8} {'w_lower':>14} {'w_upper':>14} {'asym_lower':>14} {'asym_upper':>14}")
        for t in payload["boundaries"]:
            lines.append(
                f"{t['center']:>8g} {t['eps']:>8g} {t['w_lower']:>14.10f} {t['w_upper']:>14.10f} "
                f"{t['w_asymptotic_lower']:>14.10f} {t['w_asymptotic_upper']:>14.10f}"
            )
    else:
        lines.append(f"s0 = ({_fmt(payload['s0'][0])}, {_fmt(payload['s0'][1])})")
        lines.append(f"fitted rate {_fmt(payload['rate'])} +- {_fmt(payload['stderr'])}  (r^2 {_fmt(payload['r_squared'])})")
        lines.append(f"from multipliers: {_fmt(payload['spectrum_rate'])}")
        for pt in payload["points"]:
            lines.append(f"  {pt['kT']:>10.5f} {pt['ln_d']:>14.8f}")
    return "\n".join(lines) + "\n"


def _render(command: str, fmt: str, payload: dict, extra: dict) -> str:
    if fmt == "json":
        return dumps(payload)
    if fmt == "csv":
        return _render_csv(command, payload, extra)
    return _render_text(command, payload)


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="duffing-floquet", description="Periodic solutions and Floquet stability of damped Duffing equations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field by dotted path")
    ap.add_argument("--output", help="write the result here instead of stdout")
    ap.add_argument("--format", choices=("json", "csv", "text"), help="output format (default json)")
    return ap


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, newline="")
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head)
            sys.stderr.close()


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config, args.set)
        out = doc.get("output", {})
        fmt = args.format or out.get("format", "json")
        if fmt not in ("json", "csv", "text"):
            raise ConfigError("output.format must be json, csv or text")
        path = args.output or out.get("path")
        payload, extra = HANDLERS[args.command](doc)
    except _Failure as err:
        print(f"error: {err}", file=sys.stderr)
        if fmt == "json":
            _write(dumps({"command": args.command, "error": str(err), "exit_code": err.code, **err.payload}), path)
        return err.code
    except (ConfigError, SchemaError, ValidationError, ParseError, DomainError, IntegrationError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    _write(_render(args.command, fmt, payload, extra), path)
    if args.command == "scan-hill" and fmt == "csv" and path:
        _write(_boundary_csv(extra["boundaries"]), str(Path(path).with_suffix(".boundaries.csv")))
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
