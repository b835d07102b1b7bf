"""Desk-scale reproductions of the comparison studies: random-instance
runtime benchmarks and the two-buyer welfare-ratio grid search."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import solve_continuous
from .evaluate import welfare
from .model import (
    AuctionInstance,
    NumericalError,
    TimeoutExceeded,
    ValidationError,
    ValueDistribution,
    dumps_canonical,
)
from .solver import solve

MIN_VALUE_GAP = 1e-6   # random supports keep values at least this far apart


@dataclass(frozen=True)
class BenchConfig:
    n: int = 5
    d: int = 5
    count: int = 100
    timeout_s: float = 30.0
    seed: int = 0
    tol_discrete: float = 1e-8
    tol_baseline: float = 0.01

    def __post_init__(self):
        if min(self.n, self.d, self.count) <= 0 or self.timeout_s <= 0:
            raise ValidationError("bench parameters must be positive")


def random_instance(n: int, d: int, seed: int) -> AuctionInstance:
    """Deterministic random instance: d distinct uniform values per buyer,
    masses from a flat simplex draw."""
    if n < 2 or d < 1:
        raise ValidationError("need n >= 2 buyers and d >= 1 values")
    rng = np.random.default_rng(seed)
    buyers = []
    for _ in range(n):
        while True:
            values = np.sort(rng.uniform(0.0, 1.0, size=d))
            if d == 1 or np.min(np.diff(values)) > MIN_VALUE_GAP:
                break
        masses = rng.dirichlet(np.ones(d))
        masses = masses / masses.sum()
        buyers.append(ValueDistribution(values, masses))
    return AuctionInstance(tuple(buyers))


# ---------------------------------------------------------------------------
# Runtime benchmark


def bench(config: BenchConfig, out_csv: str | None = None):
    """Run both solvers on a batch of random instances with a wall-clock
    deadline per run; timeouts and non-convergences are data, not errors.

    Returns the result rows; writes them as CSV when ``out_csv`` is given,
    along with a cumulative finished-count table next to it.
    """
    rows = []
    for idx in range(config.count):
        instance = random_instance(config.n, config.d, config.seed + idx)
        rows.append(_bench_one(idx, "discrete", config.tol_discrete,
                               config.timeout_s, _run_discrete, instance))
        rows.append(_bench_one(idx, "baseline", config.tol_baseline,
                               config.timeout_s, _run_baseline, instance))
    if out_csv:
        _write_bench_csv(rows, out_csv)
    return rows


def _run_discrete(instance, tol, deadline):
    report = solve(instance, tol=tol, deadline=deadline)
    return report.residual < tol


def _run_baseline(instance, tol, deadline):
    report = solve_continuous(instance, tol=tol, deadline=deadline)
    return report.converged


def _bench_one(idx, solver, tol, timeout_s, runner, instance):
    deadline = time.monotonic() + timeout_s
    t0 = time.perf_counter()
    try:
        finished = runner(instance, tol, deadline)
        status = "ok" if finished else "fail"
    except TimeoutExceeded:
        status = "timeout"
    except (NumericalError, ValidationError):
        status = "fail"
    ms = (time.perf_counter() - t0) * 1e3
    return {"instance": idx, "solver": solver, "tol": tol,
            "status": status, "ms": ms}


def _write_bench_csv(rows, out_csv):
    path = Path(out_csv)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "solver", "tol", "ms"])
        for r in rows:
            cell = f"{r['ms']:.3f}" if r["status"] == "ok" else "TIMEOUT"
            writer.writerow([r["instance"], r["solver"], r["tol"], cell])
    cum_path = path.with_name(path.stem + "_cumulative.csv")
    with cum_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "ms", "finished_count"])
        for solver in ("discrete", "baseline"):
            done = sorted(r["ms"] for r in rows
                          if r["solver"] == solver and r["status"] == "ok")
            for k, ms in enumerate(done, start=1):
                writer.writerow([solver, f"{ms:.3f}", k])


def finished_counts(rows) -> dict[str, int]:
    out = {"discrete": 0, "baseline": 0}
    for r in rows:
        if r["status"] == "ok":
            out[r["solver"]] += 1
    return out


# ---------------------------------------------------------------------------
# Welfare-ratio grid search


def compositions(total: int, bins: int):
    """All length-``bins`` nonnegative integer vectors summing to ``total``,
    in lexicographic order (deterministic enumeration contract)."""
    if bins == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in compositions(total - head, bins - 1):
            yield (head,) + rest


def grid_distributions(D: int, M: int) -> list[ValueDistribution]:
    """Value grid d/D for d=0..D with masses in multiples of 1/M."""
    out = []
    for comp in compositions(M, D + 1):
        values = [d / D for d in range(D + 1) if comp[d] > 0]
        masses = [comp[d] / M for d in range(D + 1) if comp[d] > 0]
        out.append(ValueDistribution(np.array(values), np.array(masses)))
    return out


def poa_pair_count(D: int, M: int) -> int:
    c = math.comb(M + D, D)
    return c * (c + 1) // 2


@dataclass(frozen=True)
class PoaResult:
    min_ratio: float
    argmin: tuple[int, int]
    pairs_done: int
    pairs_skipped: int


def worker_count() -> int:
    """FPA_THREADS caps the experiment worker pool; default is sequential."""
    try:
        return max(1, int(os.environ.get("FPA_THREADS", "1")))
    except ValueError:
        return 1


def _pair_index_iter(c: int):
    index = 0
    for a in range(c):
        for b in range(a, c):
            yield index, a, b
            index += 1


_POOL_DISTS = None
_POOL_TOL = None


def _pool_init(D, M, tol):
    global _POOL_DISTS, _POOL_TOL
    _POOL_DISTS = grid_distributions(D, M)
    _POOL_TOL = tol


def _pool_ratio(pair):
    a, b = pair
    return _pair_ratio(_POOL_DISTS[a], _POOL_DISTS[b], _POOL_TOL)


def poa_search(D: int, M: int, out_csv: str | None = None,
               checkpoint: str | None = None, tol: float = 1e-8,
               budget: int | None = None, block: int = 512) -> PoaResult:
    """Enumerate all unordered two-buyer pairs on the grid, solve each and
    track the smallest first-price/second-price welfare ratio.

    Deterministic and resumable: pairs are processed in blocks of fixed
    index order, the checkpoint stores the next pair index plus the running
    minimum, and interrupt-plus-resume yields the identical result.  With
    FPA_THREADS > 1 a process pool evaluates each block, and the ordered
    single-threaded reduction keeps the outputs schedule-independent.
    Pairs where both buyers sit entirely on value 0 have no welfare to
    compare and are skipped (counted separately).
    """
    dists = grid_distributions(D, M)
    c = len(dists)
    total = c * (c + 1) // 2
    assert total == poa_pair_count(D, M)
    if budget is not None and total > budget:
        raise ValidationError(f"grid has {total} pairs, over budget {budget}")

    start = 0
    min_ratio = math.inf
    argmin = (-1, -1)
    skipped = 0
    if checkpoint and os.path.exists(checkpoint):
        state = json.loads(Path(checkpoint).read_text())
        if state.get("D") != D or state.get("M") != M:
            raise ValidationError("checkpoint is for a different grid")
        start = state["next_index"]
        min_ratio = state["min_ratio"] if state["min_ratio"] is not None else math.inf
        argmin = tuple(state["argmin"])
        skipped = state.get("skipped", 0)

    csv_fh = None
    writer = None
    if out_csv:
        append = os.path.exists(out_csv) and start > 0
        csv_fh = open(out_csv, "a" if append else "w", newline="")
        writer = csv.writer(csv_fh)
        if not append:
            writer.writerow(["pair", "dist_a", "dist_b", "ratio"])

    workers = worker_count()
    pool = None
    if workers > 1:
        import concurrent.futures

        pool = concurrent.futures.ProcessPoolExecutor(
            max_workers=workers, initializer=_pool_init, initargs=(D, M, tol)
        )
    try:
        todo = [(i, a, b) for i, a, b in _pair_index_iter(c) if i >= start]
        for blk in range(0, len(todo), block):
            chunk = todo[blk : blk + block]
            if pool is not None:
                ratios = list(pool.map(_pool_ratio,
                                       [(a, b) for _, a, b in chunk],
                                       chunksize=16))
            else:
                ratios = [_pair_ratio(dists[a], dists[b], tol)
                          for _, a, b in chunk]
            for (index, a, b), ratio in zip(chunk, ratios):
                if ratio is None:
                    skipped += 1
                elif ratio < min_ratio:
                    min_ratio = ratio
                    argmin = (a, b)
                if writer:
                    writer.writerow(
                        [index, a, b, "" if ratio is None else f"{ratio:.10f}"]
                    )
            if checkpoint:
                _save_checkpoint(checkpoint, D, M, chunk[-1][0] + 1,
                                 min_ratio, argmin, skipped)
        if checkpoint:
            _save_checkpoint(checkpoint, D, M, total, min_ratio, argmin,
                             skipped)
    finally:
        if pool is not None:
            pool.shutdown()
        if csv_fh:
            csv_fh.close()
    return PoaResult(min_ratio, argmin, total - skipped, skipped)


def _pair_ratio(da: ValueDistribution, db: ValueDistribution, tol):
    if da.max_value == 0.0 and db.max_value == 0.0:
        return None  # nobody values the item: no welfare in either format
    instance = AuctionInstance((da, db))
    report = solve(instance, tol=tol)
    return welfare(report.equilibrium, instance).ratio


def _save_checkpoint(path, D, M, next_index, min_ratio, argmin, skipped):
    state = {
        "D": D,
        "M": M,
        "next_index": next_index,
        "min_ratio": None if math.isinf(min_ratio) else min_ratio,
        "argmin": list(argmin),
        "skipped": skipped,
    }
    Path(path).write_text(dumps_canonical(state))
