"""Command-line front end: run, analyze and serialize models.

Exit codes: 0 success, 1 usage error, 2 model error (parse/validation),
3 numeric failure (integration, root finding, state-space limits).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, models, stochastic
from .diagram import compile_rhs, validate_diagram
from .errors import IntegrationError, ModelError, NoRoot, NotReached, \
    StateSpaceTooLarge, SwarmkError
from .integrate import integrate, integrate_delayed, iterate_difference
from .parser import parse_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we need 1."""

    def error(self, message):
        raise _UsageError(message)


def _split_overrides(name, overrides):
    """Route overrides to builder fields vs diagram parameters."""
    if name not in models.BUILTIN_NAMES:
        return {}, overrides
    fields = set(models.builder_fields(name))
    builder = {k: v for k, v in overrides.items() if k in fields}
    params = {k: v for k, v in overrides.items() if k not in fields}
    return builder, params


def _load_model(name, overrides):
    if name is None:
        raise _UsageError("--model is required")
    if name in models.BUILTIN_NAMES:
        builder_kw, overrides = _split_overrides(name, overrides)
        diagram = models.build_builtin(name, **builder_kw)
    elif os.path.exists(name):
        diagram = parse_file(name)
    else:
        raise ModelError(f"unknown model {name!r}: not a built-in "
                         f"({', '.join(models.BUILTIN_NAMES)}) and not a file")
    if overrides:
        diagram = diagram.with_params(**overrides)
    return diagram


def _parse_overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise _UsageError(f"--set expects name=value, got {item!r}")
        k, _, v = item.partition("=")
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise _UsageError(f"--set value for {k!r} is not a number: {v!r}")
    return out


def _fmt_float(v):
    if v is None:
        return ""
    return repr(float(v))


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _traj_csv(traj):
    lines = ["t," + ",".join(traj.columns)]
    for t, row in zip(traj.times, traj.data):
        lines.append(",".join([_fmt_float(t)] + [_fmt_float(v) for v in row]))
    return "\n".join(lines) + "\n"


def _traj_json(traj):
    payload = {
        "columns": ["t"] + list(traj.columns),
        "rows": [[float(t)] + [float(v) for v in row]
                 for t, row in zip(traj.times, traj.data)],
        "metadata": {k: v for k, v in traj.metadata.items()
                     if isinstance(v, (str, int, float, dict))},
    }
    return json.dumps(payload, indent=2) + "\n"


def _sweep_csv(table):
    lines = ["param," + ",".join(table.observables)]
    for v, row, err in zip(table.grid, table.rows, table.errors):
        cells = [_fmt_float(v)]
        for x in row:
            cells.append("" if x is None else _fmt_float(x))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _sweep_json(table):
    return json.dumps({
        "param": table.param,
        "observables": list(table.observables),
        "rows": [{"value": v,
                  "observables": [None if x is None else float(x) for x in row],
                  "error": err}
                 for v, row, err in zip(table.grid, table.rows, table.errors)],
        "provenance": table.provenance,
    }, indent=2) + "\n"


def _stats_csv(stats):
    cols = []
    for c in stats.columns:
        cols.append(f"{c}_mean")
        cols.append(f"{c}_stderr")
    lines = ["t," + ",".join(cols)]
    for i, t in enumerate(stats.times):
        cells = [_fmt_float(t)]
        for j in range(len(stats.columns)):
            cells.append(_fmt_float(stats.mean[i, j]))
            cells.append(_fmt_float(stats.stderr[i, j]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _build_parser():
    p = _Parser(prog="swarmk",
                description="Macroscopic rate-equation models of "
                            "multi-robot systems.")
    sub = p.add_subparsers(dest="command")

    def common(sp, dt=True):
        sp.add_argument("--model", help="built-in name or .mas file path")
        sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                        help="override a model parameter (repeatable)")
        sp.add_argument("--out", help="write output to this file")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if dt:
            sp.add_argument("--dt", type=float, default=0.01)
            sp.add_argument("--t-end", type=float, default=10.0)
            sp.add_argument("--steps", type=int, default=None,
                            help="step count for difference models")

    sp = sub.add_parser("run", help="integrate a model, emit the trajectory")
    common(sp)

    sp = sub.add_parser("steady", help="steady searching fraction of a "
                                       "stick-pulling model")
    common(sp, dt=False)

    sp = sub.add_parser("sweep", help="observables over a parameter grid")
    common(sp)
    sp.add_argument("--param", required=False)
    sp.add_argument("--from", dest="lo", type=float)
    sp.add_argument("--to", dest="hi", type=float)
    sp.add_argument("--sweep-steps", "--grid", dest="npts", type=int, default=20)
    sp.add_argument("--observables", default="nstar,R")
    sp.add_argument("--counter")
    sp.add_argument("--mode", choices=("deplete", "reach"), default="deplete")
    sp.add_argument("--threshold", type=float)

    sp = sub.add_parser("mc", help="Gillespie ensemble statistics")
    common(sp)
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--grid-points", type=int, default=50)

    sp = sub.add_parser("exact", help="master-equation expectations")
    common(sp)

    sp = sub.add_parser("compare", help="mean-field vs exact vs mc")
    common(sp)
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--grid-points", type=int, default=50)

    sp = sub.add_parser("validate", help="report diagram defects")
    common(sp, dt=False)

    sub.add_parser("list", help="list built-in models")
    return p


def _cmd_run(args):
    diagram = _load_model(args.model, _parse_overrides(args.set))
    system = compile_rhs(diagram)
    if system.flavor == "ode":
        traj = integrate(system, t_end=args.t_end, dt=args.dt)
    elif system.flavor == "dde":
        traj = integrate_delayed(system, t_end=args.t_end, dt=args.dt)
    else:
        k = args.steps if args.steps is not None else int(round(args.t_end))
        traj = iterate_difference(system, k_steps=k)
    _emit(_traj_csv(traj) if args.format == "csv" else _traj_json(traj),
          args.out)
    return EXIT_OK


def _cmd_steady(args):
    diagram = _load_model(args.model, _parse_overrides(args.set))
    p = diagram.params
    if "beta" not in p or "rg" not in p:
        raise ModelError("steady needs a stick-pulling model with "
                         "beta and rg parameters")
    if "gamma" in p:
        res = analysis.steady_state_simple(p["beta"], p["gamma"], p["rg"])
    elif "tau" in p:
        res = analysis.steady_state_delayed(p["beta"], p["tau"], p["rg"])
    else:
        raise ModelError("model has neither gamma nor tau")
    r = analysis.collaboration_rate(res.n, p["beta"], p["rg"])
    if args.format == "json":
        _emit(json.dumps({"n": res.n, "branch": res.branch,
                          "residual": res.residual, "R": r}, indent=2) + "\n",
              args.out)
    else:
        _emit(f"n={_fmt_float(res.n)}\nbranch={res.branch}\n"
              f"residual={_fmt_float(res.residual)}\nR={_fmt_float(r)}\n",
              args.out)
    return EXIT_OK


def _cmd_sweep(args):
    if args.param is None or args.lo is None or args.hi is None:
        raise _UsageError("sweep requires --param, --from and --to")
    if args.npts < 1:
        raise _UsageError("--sweep-steps must be >= 1")
    overrides = _parse_overrides(args.set)
    if args.model in models.BUILTIN_NAMES and \
            args.param in models.builder_fields(args.model):
        builder_kw, param_kw = _split_overrides(args.model, overrides)

        def model(value):
            d = models.build_builtin(args.model,
                                     **{**builder_kw, args.param: value})
            return d.with_params(**param_kw) if param_kw else d
    else:
        model = _load_model(args.model, overrides)
    grid = np.linspace(args.lo, args.hi, args.npts)
    observables = tuple(s.strip() for s in args.observables.split(",") if s.strip())
    table = analysis.sweep(model, args.param, grid, observables,
                           t_end=args.t_end, dt=args.dt,
                           counter=args.counter, mode=args.mode,
                           threshold=args.threshold)
    _emit(_sweep_csv(table) if args.format == "csv" else _sweep_json(table),
          args.out)
    return EXIT_OK


def _grid(args):
    return np.linspace(0.0, args.t_end, args.grid_points + 1)


def _cmd_mc(args):
    diagram = _load_model(args.model, _parse_overrides(args.set))
    grid = _grid(args)
    stats = stochastic.ensemble(
        lambda seed: stochastic.ssa_run(diagram, t_end=args.t_end, seed=seed),
        args.runs, args.seed, grid)
    if args.format == "json":
        payload = {"times": [float(t) for t in stats.times],
                   "columns": stats.columns,
                   "mean": stats.mean.tolist(),
                   "stderr": stats.stderr.tolist(),
                   "runs": stats.n_runs, "seed": stats.master_seed}
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _emit(_stats_csv(stats), args.out)
    return EXIT_OK


def _cmd_exact(args):
    diagram = _load_model(args.model, _parse_overrides(args.set))
    _, traj = stochastic.master_exact(diagram, t_end=args.t_end, dt=args.dt,
                                      dt_out=max(args.dt, args.t_end / 100))
    _emit(_traj_csv(traj) if args.format == "csv" else _traj_json(traj),
          args.out)
    return EXIT_OK


def _cmd_compare(args):
    diagram = _load_model(args.model, _parse_overrides(args.set))
    system = compile_rhs(diagram)
    if system.flavor != "ode":
        raise ModelError("compare needs a memoryless (ode) model")
    mf = integrate(system, t_end=args.t_end, dt=args.dt)
    _, exact = stochastic.master_exact(diagram, t_end=args.t_end, dt=args.dt,
                                       dt_out=args.dt)
    grid = _grid(args)
    stats = stochastic.ensemble(
        lambda seed: stochastic.ssa_run(diagram, t_end=args.t_end, seed=seed),
        args.runs, args.seed, grid)
    cols = diagram.state_names + diagram.env_names
    header = ["t"]
    for c in cols:
        header += [f"{c}_mf", f"{c}_exact", f"{c}_mc", f"{c}_mc_stderr",
                   f"{c}_gap_exact", f"{c}_gap_mc"]
    lines = [",".join(header)]
    rows = []
    for i, t in enumerate(grid):
        cells = [_fmt_float(t)]
        row = {}
        for j, c in enumerate(cols):
            v_mf = float(np.interp(t, mf.times, mf.column(c)))
            v_ex = float(np.interp(t, exact.times, exact.column(c)))
            v_mc = float(stats.mean[i, j])
            v_se = float(stats.stderr[i, j])
            vals = [v_mf, v_ex, v_mc, v_se, v_ex - v_mf, v_mc - v_ex]
            cells += [_fmt_float(v) for v in vals]
            row[c] = vals
        lines.append(",".join(cells))
        rows.append({"t": float(t), "columns": row})
    if args.format == "json":
        _emit(json.dumps({"rows": rows}, indent=2) + "\n", args.out)
    else:
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_validate(args):
    diagram = _load_model(args.model, _parse_overrides(args.set))
    report = validate_diagram(diagram)
    if report.ok:
        _emit(f"ok: {diagram.name} has no defects\n", args.out)
        return EXIT_OK
    for defect in report.defects:
        print(f"defect: {defect}", file=sys.stderr)
    return EXIT_MODEL


def _cmd_list(args):
    _emit("\n".join(models.BUILTIN_NAMES) + "\n", getattr(args, "out", None))
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run, "steady": _cmd_steady, "sweep": _cmd_sweep,
    "mc": _cmd_mc, "exact": _cmd_exact, "compare": _cmd_compare,
    "validate": _cmd_validate, "list": _cmd_list,
}


def run_cli(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required "
                              f"({', '.join(_COMMANDS)})")
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (IntegrationError, NoRoot, NotReached, StateSpaceTooLarge) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SwarmkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


def main():
    raise SystemExit(run_cli())
