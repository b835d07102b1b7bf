"""Command-line interface: one executable, stable machine-readable outputs.

Structured results go to stdout (or --out files) as canonical JSON with
sorted keys and fixed float formatting, so identical invocations are
byte-identical.  Exactly one JSON status line lands on stderr per run,
carrying the command name, elapsed milliseconds, the exit code, and the
per-command report fields.  Exit codes: 0 success, 1 usage, 2 validation,
3 numerical failure, 4 timeout.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import baseline as baseline_mod
from . import evaluate as evaluate_mod
from . import experiments as experiments_mod
from .descent import run_descent
from .model import (
    NumericalError,
    TimeoutExceeded,
    ValidationError,
    dumps_canonical,
    format_float,
    parse_equilibrium,
    parse_instance,
    serialize_equilibrium,
)
from .solver import solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_TIMEOUT = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def build_parser() -> _Parser:
    p = _Parser(prog="fpa", description="First-price auction equilibrium toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute the equilibrium of an instance")
    s.add_argument("instance")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--reserve", type=float, default=None)
    s.add_argument("--out", default=None)

    s = sub.add_parser("descent", help="run one walk from a guessed top bid")
    s.add_argument("instance")
    s.add_argument("--bbar", type=float, required=True)
    s.add_argument("--trace", default=None)

    s = sub.add_parser("verify", help="best-response check of an equilibrium")
    s.add_argument("equilibrium")
    s.add_argument("instance")
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--grid", type=int, default=2000)

    s = sub.add_parser("welfare", help="welfare and revenue functionals")
    s.add_argument("equilibrium")
    s.add_argument("instance")

    s = sub.add_parser("cdf", help="sample one buyer's bid CDF as CSV")
    s.add_argument("equilibrium")
    s.add_argument("--buyer", type=int, required=True)
    s.add_argument("--samples", type=int, default=200)

    s = sub.add_parser("baseline", help="continuous-approximation solver")
    s.add_argument("instance")
    s.add_argument("--w", type=float, default=baseline_mod.DEFAULT_W)
    s.add_argument("--eps-mix", type=float, default=baseline_mod.DEFAULT_EPS_MIX)
    s.add_argument("--step", type=float, default=baseline_mod.DEFAULT_STEP)
    s.add_argument("--tol", type=float, default=0.01)
    s.add_argument("--clamp", type=float, default=None)
    s.add_argument("--trajectory", default=None)

    s = sub.add_parser("bench", help="runtime comparison on random instances")
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--d", type=int, default=5)
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--timeout", type=float, default=30.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol-discrete", type=float, default=1e-8)
    s.add_argument("--tol-baseline", type=float, default=0.01)
    s.add_argument("--out", required=True)

    s = sub.add_parser("poa", help="two-buyer welfare-ratio grid search")
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--out", default=None)
    s.add_argument("--checkpoint", default=None)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--budget", type=int, default=None)

    return p


def _cmd_solve(args) -> dict:
    instance = parse_instance(_read(args.instance))
    if args.reserve is not None:
        instance = type(instance)(instance.buyers, args.reserve)
    report = solve(instance, tol=args.tol)
    _emit(serialize_equilibrium(report.equilibrium), args.out)
    return {
        "b_min": report.b_min,
        "b_max": report.b_max,
        "iterations": report.iterations,
        "residual": report.residual,
        "ms": round(report.wall_ms, 3),
    }


def _cmd_descent(args) -> dict:
    instance = parse_instance(_read(args.instance))
    trace = run_descent(instance, args.bbar)
    _emit(dumps_canonical(trace.to_dict()), args.trace)
    return {"bbar": trace.bbar, "stop": trace.stop, "events": trace.event_count}


def _cmd_verify(args) -> dict:
    eq = parse_equilibrium(_read(args.equilibrium))
    instance = parse_instance(_read(args.instance))
    report = evaluate_mod.verify_bne(eq, instance, eps=args.eps, grid=args.grid)
    doc = {
        "eps": report.eps,
        "grid": report.grid_size,
        "max_regret": report.max_regret,
        "passed": report.passed,
        "cells": [
            {
                "buyer": c.buyer,
                "value": c.value,
                "prescribed_bid": c.prescribed_bid,
                "prescribed_utility": c.prescribed_utility,
                "best_bid": c.best_bid,
                "best_utility": c.best_utility,
                "regret": c.regret,
            }
            for c in report.cells
        ],
    }
    _emit(dumps_canonical(doc), None)
    if not report.passed:
        raise NumericalError(f"max regret {report.max_regret} exceeds eps {report.eps}")
    return {"max_regret": report.max_regret, "passed": report.passed}


def _cmd_welfare(args) -> dict:
    eq = parse_equilibrium(_read(args.equilibrium))
    instance = parse_instance(_read(args.instance))
    wel = evaluate_mod.welfare(eq, instance)
    rev_f, rev_s = evaluate_mod.revenue(eq, instance)
    doc = {
        "wel_f": wel.wel_f,
        "wel_s": wel.wel_s,
        "ratio": wel.ratio,
        "rev_f": rev_f,
        "rev_s": rev_s,
    }
    _emit(dumps_canonical(doc), None)
    return {"ratio": wel.ratio}


def _cmd_cdf(args) -> dict:
    eq = parse_equilibrium(_read(args.equilibrium))
    if args.samples < 2:
        raise ValidationError("need at least two samples")
    xs = np.linspace(eq.b_min, eq.b_max, args.samples)
    fs = evaluate_mod.cdf_many(eq, args.buyer, xs)
    lines = ["x,F"]
    lines += [f"{format_float(x)},{format_float(f)}" for x, f in zip(xs, fs)]
    sys.stdout.write("\n".join(lines) + "\n")
    return {"buyer": args.buyer, "samples": args.samples}


def _cmd_baseline(args) -> dict:
    instance = parse_instance(_read(args.instance))
    report = baseline_mod.solve_continuous(
        instance, tol=args.tol, w=args.w, eps_mix=args.eps_mix,
        step=args.step, clamp=args.clamp,
    )
    if args.trajectory and report.best_shoot is not None:
        shoot = report.best_shoot
        scale = report.scale
        n = shoot.t_path.shape[1]
        lines = ["b," + ",".join(f"t{i+1}" for i in range(n))]
        bs = shoot.b_path
        for k in range(len(shoot.t_path)):
            row = [format_float(bs[k] * scale)]
            row += [format_float(t * scale) for t in shoot.t_path[k]]
            lines.append(",".join(row))
        Path(args.trajectory).write_text("\n".join(lines) + "\n")
    doc = {
        "converged": report.converged,
        "iterations": report.iterations,
        "b_bar": report.b_bar,
        "b_min_computed": report.b_min_computed,
        "residual": report.residual,
    }
    _emit(dumps_canonical(doc), None)
    if not report.converged:
        raise NumericalError(
            f"continuous solve did not reach tol={args.tol}: "
            f"best residual {report.residual}"
        )
    return {"b_min_computed": report.b_min_computed}


def _cmd_bench(args) -> dict:
    config = experiments_mod.BenchConfig(
        n=args.n, d=args.d, count=args.count, timeout_s=args.timeout,
        seed=args.seed, tol_discrete=args.tol_discrete,
        tol_baseline=args.tol_baseline,
    )
    rows = experiments_mod.bench(config, out_csv=args.out)
    counts = experiments_mod.finished_counts(rows)
    return {"finished": counts, "out": args.out}


def _cmd_poa(args) -> dict:
    result = experiments_mod.poa_search(
        args.D, args.M, out_csv=args.out, checkpoint=args.checkpoint,
        tol=args.tol, budget=args.budget,
    )
    doc = {
        "min_ratio": result.min_ratio,
        "argmin": list(result.argmin),
        "pairs_done": result.pairs_done,
        "pairs_skipped": result.pairs_skipped,
    }
    _emit(dumps_canonical(doc), None)
    return {"min_ratio": result.min_ratio}


_COMMANDS = {
    "solve": _cmd_solve,
    "descent": _cmd_descent,
    "verify": _cmd_verify,
    "welfare": _cmd_welfare,
    "cdf": _cmd_cdf,
    "baseline": _cmd_baseline,
    "bench": _cmd_bench,
    "poa": _cmd_poa,
}


def dispatch(argv) -> int:
    """Route a command line to its implementation; never raises on user input."""
    t0 = time.perf_counter()
    command = "?"
    extras: dict = {}
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        extras = _COMMANDS[command](args)
        code = EXIT_OK
    except UsageError as e:
        extras = {"error": str(e)}
        code = EXIT_USAGE
    except (ValidationError, ValueError, OSError) as e:
        extras = {"error": str(e)}
        code = EXIT_VALIDATION
    except TimeoutExceeded as e:
        extras = {"error": str(e)}
        code = EXIT_TIMEOUT
    except (RuntimeError, ArithmeticError) as e:
        extras = {"error": str(e)}
        code = EXIT_NUMERICAL
    status = {
        "command": command,
        "elapsed_ms": round((time.perf_counter() - t0) * 1e3, 3),
        "exit_code": code,
    }
    status.update(extras)
    sys.stderr.write(json.dumps(status, sort_keys=True, default=str) + "\n")
    return code


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
