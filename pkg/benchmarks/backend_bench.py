#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

The backend is chosen at import time, so each timing runs in a fresh
subprocess with FPA_PURE_PYTHON toggled.  Usage:

    python benchmarks/backend_bench.py [--count 20]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import fpa
from fpa.baseline import solve_continuous
from fpa.experiments import random_instance
from fpa.model import AuctionInstance, ValueDistribution
from fpa.solver import solve
import numpy as np
import math

count = int(sys.argv[1])

def cums(values, cs):
    return ValueDistribution(np.array(values, float), np.diff([0.0] + cs))

worked = AuctionInstance((
    cums([2, 10, 20], [math.sqrt(77)/(12*math.sqrt(2)),
                       11*math.sqrt(7)/(24*math.sqrt(3)), 1.0]),
    cums([1, 13, 14], [2*math.sqrt(22)/(7*math.sqrt(7)), 4/math.sqrt(21), 1.0]),
    cums([9, 20], [11/12, 1.0]),
    cums([1, 12], [3*math.sqrt(3)/(2*math.sqrt(7)), 1.0]),
))

timings = {"backend": fpa.BACKEND}

t0 = time.perf_counter()
for _ in range(count):
    solve(worked, 1e-8)
timings["solve_worked_ms"] = (time.perf_counter() - t0) * 1e3 / count

instances = [random_instance(5, 5, 31000 + k) for k in range(count)]
t0 = time.perf_counter()
for inst in instances:
    solve(inst, 1e-8)
timings["solve_random_n5_d5_ms"] = (time.perf_counter() - t0) * 1e3 / count

t0 = time.perf_counter()
for inst in instances[: max(1, count // 4)]:
    solve_continuous(inst, tol=0.01)
timings["continuous_solve_ms"] = (
    (time.perf_counter() - t0) * 1e3 / max(1, count // 4)
)

print(json.dumps(timings))
"""


def run(pure: bool, count: int) -> dict:
    env = dict(os.environ)
    env["FPA_PURE_PYTHON"] = "1" if pure else "0"
    out = subprocess.run(
        [sys.executable, "-c", WORKLOAD, str(count)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--count", type=int, default=20)
    args = parser.parse_args()

    compiled = run(pure=False, count=args.count)
    fallback = run(pure=True, count=args.count)
    if compiled["backend"] == fallback["backend"]:
        print("note: compiled extension unavailable; both runs used the fallback")

    keys = [k for k in compiled if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'workload':<{width}}  {'compiled':>12}  {'pure python':>12}  {'speedup':>8}")
    for k in keys:
        ratio = fallback[k] / compiled[k] if compiled[k] > 0 else float("inf")
        print(f"{k:<{width}}  {compiled[k]:>10.2f}ms  {fallback[k]:>10.2f}ms  {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
