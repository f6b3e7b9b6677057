"""Command line interface: ``solve``, ``verify`` and ``convergence``.

Exit codes are 0 on success, 2 for configuration errors, 3 when a solve
does not converge (or its sandwich check fails) and 4 for numeric
breakdowns.
"""
import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import _kernels
from .errors import ConfigError, HessianError, NumericError
from .problem import build_problem
from .solver import SolverConfig, continuity_solve
from .symfun import ConeSpec
from .verify import run_all

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_NUMERIC = 0, 2, 3, 4

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_FUNC = {"$ref": "#/$defs/function"}
_FACTOR = {
    "type": "array",
    "items": {
        "oneOf": [
            _obj({"poly": _VEC, "power": _NUM}, ["poly"]),
            _obj({"exp": _NUM, "scale": _NUM}, ["exp"]),
        ]
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {
        "function": _obj({
            "type": {"enum": ["quadratic", "exp_radial", "linear", "sum"]},
            "scale": _NUM, "center": _VEC, "offset": _NUM, "amp": _NUM, "rate": _NUM,
            "coeffs": _VEC, "parts": {"type": "array", "items": _FUNC},
        }, ["type"]),
    },
    **_obj({
        "problem": _obj({
            "grid": _obj({
                "lo": _VEC, "hi": _VEC,
                "m": {"type": "array", "items": {"type": "integer", "minimum": 5}},
            }, ["lo", "hi", "m"]),
            "k": {"type": "integer", "minimum": 1},
            "metric": _obj({
                "type": {"enum": ["flat", "diag_poly", "conformal"]},
                "diag": {"type": "array", "items": _obj({"axis": {"type": ["integer", "null"]}, "coeffs": _VEC},
                                                         ["coeffs"])},
                "c0": _NUM, "lin": _VEC, "quad": _NUM,
            }, ["type"]),
            "christoffel": {"enum": ["analytic", "fd"]},
            "chi": _obj({
                "type": {"enum": ["zero", "scalar", "diag", "matrix"]},
                "alpha": _NUM,
                "values": {"type": "array", "items": {"oneOf": [_NUM, _VEC]}},
            }, ["type"]),
            "exact": _FUNC,
            "phi": _FUNC,
            "rhs": _obj({
                "type": {"enum": ["constant", "separable", "manufactured"]},
                "value": _NUM, "a": _FACTOR, "b": _FACTOR, "c": _FACTOR,
                "growth": _obj({"gamma1": _NUM, "gamma2": _NUM, "fbar": _NUM}, ["gamma1", "gamma2"]),
            }, ["type"]),
            "usub": _obj({"bubble": {"type": "number", "minimum": 0}, "function": _FUNC}),
        }, ["grid", "k", "rhs"]),
        "solver": _obj({
            "newton_tol": _NUM, "max_newton": {"type": "integer"}, "homotopy_dt0": _NUM,
            "homotopy_dt_min": _NUM, "linesearch_shrink": _NUM, "linesearch_min_step": _NUM,
            "cone_margin": _NUM, "linear_tol": _NUM,
            "linear_solver": {"enum": ["auto", "direct", "iterative"]},
            "direct_max": {"type": "integer"},
        }),
        "outputs": _obj({"fields": {"type": "boolean"}}),
    }, ["problem"]),
}

REPORT_KEYS = ("converged", "t_reached", "residual_inf", "min_cone_margin", "sandwich_ok", "c1_ratio",
               "c2_ratio", "subsolution", "wall_time")


def _where(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def load_config(path):
    """Read and validate a run configuration.

    Raises
    ------
    ConfigError
        With the offending line (for JSON syntax errors) or key path.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{path}: at {_where(e)}: {e.message}" for e in errors]
        raise ConfigError("\n".join(lines))
    return cfg


def _prepare(cfg, m=None):
    try:
        prob = build_problem(cfg["problem"], m=m)
        scfg = SolverConfig(**cfg.get("solver", {}))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc
    return prob, scfg


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    return format(float(v), ".17g")


def write_grid_csv(path, x, columns, names):
    """Write grid points and per-point columns with 17 significant digits."""
    n = x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(n)] + list(names))
        data = np.column_stack([x] + [np.asarray(c).reshape(len(x), -1) for c in columns])
        for row in data:
            w.writerow([_fmt(v) for v in row])


def cmd_solve(config_path, out_dir):
    """Solve one configured problem and write its artifacts."""
    t0 = time.perf_counter()
    cfg = load_config(config_path)
    prob, scfg = _prepare(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u, report = continuity_solve(prob, scfg)
    rep = report.to_dict()
    rep["wall_time"] = time.perf_counter() - t0
    rep["grid"] = {"m": list(prob.grid.m), "hmax": prob.grid.hmax}
    rep["backend"] = _kernels.BACKEND
    write_grid_csv(out / "solution.csv", prob.grid.points, [u], ["u"])
    if cfg.get("outputs", {}).get("fields"):
        from .operator import eval_field

        fe = eval_field(u, prob.metric, prob.chi, prob.k, derivs=False)
        names = [f"lam{i + 1}" for i in range(prob.grid.n)] + ["margin"]
        write_grid_csv(out / "fields.csv", prob.grid.points, [fe.lam, fe.margin], names)
    _write_json(out / "report.json", rep)
    ok = report.converged and report.sandwich_ok
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_verify(n, k, samples, seed, out_dir):
    """Run the cone checks for (n, k) and write checks.json."""
    try:
        cone = ConeSpec(n, k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if samples < 1:
        raise ConfigError("samples must be positive")
    reports = run_all(cone, samples, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "checks.json", {"n": n, "k": k, "samples": samples, "seed": seed,
                                      "checks": [r.to_dict() for r in reports]})
    for r in reports:
        log.info("%s: %s (min %.3e, max %.3e)", r.name, r.status, r.min_observed, r.max_observed)
    return EXIT_OK if all(r.status == "pass" for r in reports) else EXIT_NONCONVERGED


def observed_orders(h, err):
    """log(e_i / e_{i+1}) / log(h_i / h_{i+1}); first entry is nan."""
    h, err = np.asarray(h, dtype=float), np.asarray(err, dtype=float)
    orders = np.full(len(h), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders[1:] = np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])
    return orders


def cmd_convergence(config_path, levels, out_dir):
    """Solve on grids m, 2m-1, 4m-3, ... and tabulate L-infinity errors."""
    cfg = load_config(config_path)
    if "exact" not in cfg["problem"]:
        raise ConfigError("convergence study needs problem/exact")
    if levels < 1:
        raise ConfigError("levels must be >= 1")
    m0 = np.asarray(cfg["problem"]["grid"]["m"], dtype=int)
    rows, all_ok = [], True
    for lvl in range(levels):
        m = (m0 - 1) * 2**lvl + 1
        prob, scfg = _prepare(cfg, m=m.tolist())
        u, report = continuity_solve(prob, scfg)
        all_ok &= report.converged
        rows.append((lvl, int(m.max()), prob.grid.hmax, report.error_inf, report.converged))
    orders = observed_orders([r[2] for r in rows], [r[3] for r in rows])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "m", "h", "linf_error", "order", "converged"])
        for (lvl, m, h, e, conv), q in zip(rows, orders):
            w.writerow([lvl, m, _fmt(h), _fmt(e), "" if np.isnan(q) else _fmt(q), int(conv)])
    return EXIT_OK if all_ok else EXIT_NONCONVERGED


def build_parser():
    p = argparse.ArgumentParser(prog="khessian", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve a configured problem")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    v = sub.add_parser("verify", help="run the sampling checks for one cone")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--samples", type=int, default=100000)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--out", required=True)
    c = sub.add_parser("convergence", help="grid refinement study")
    c.add_argument("config")
    c.add_argument("--levels", type=int, default=3)
    c.add_argument("--out", required=True)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _kernels.set_threads()
    try:
        if args.command == "solve":
            return cmd_solve(args.config, args.out)
        if args.command == "verify":
            return cmd_verify(args.n, args.k, args.samples, args.seed, args.out)
        return cmd_convergence(args.config, args.levels, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, HessianError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
