"""Outer loop: exact smallest winning bid, binary search over the largest
winning bid, atom placement at the bottom, and the homogeneous-reserve
reduction."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .descent import DescentTrace, run_descent
from .model import (
    AuctionInstance,
    Equilibrium,
    NumericalError,
    Segment,
    TimeoutExceeded,
    ValidationError,
    ValueDistribution,
)

DEFAULT_TOL = 1e-8
MAX_ITER = 200
ATOM_EPS = 1e-12


@dataclass(frozen=True)
class SolveReport:
    equilibrium: Equilibrium
    b_min: float
    b_max: float
    iterations: int
    bracket_width: float
    residual: float
    wall_ms: float


def smallest_winning_bid(instance: AuctionInstance) -> float:
    """The unique lowest bid that can win in equilibrium.

    With i* the buyer holding the largest smallest value v*, the bid
    maximizes (v* - b) * prod_{i != i*} G_i(b).  Every G_i is a step
    function, so the maximum is attained at a value point; the largest
    maximizer is returned so degenerate all-zero objectives land on v*.
    """
    mins = [b.min_value for b in instance.buyers]
    i_star = int(np.argmax(mins))
    v_star = mins[i_star]
    candidates = sorted(
        {float(v) for b in instance.buyers for v in b.values if v <= v_star}
    )
    best_bid = candidates[0]
    best_obj = -math.inf
    for b in candidates:
        obj = (v_star - b)
        for i, dist in enumerate(instance.buyers):
            if i != i_star:
                obj *= dist.cdf(b)
        if obj >= best_obj:
            best_obj = obj
            best_bid = b
    return best_bid


def finalize(trace: DescentTrace, instance: AuctionInstance,
             b_min: float | None = None, tol: float = 1e-6) -> Equilibrium:
    """Turn a converged walk into an equilibrium by placing the bottom atoms.

    Every buyer's unallocated CDF mass bids the smallest winning bid
    deterministically; ties there are resolved by the Vickrey rule, under
    which only the highest-value contender wins.  Rejects traces whose stop
    point is not within ``tol`` of the smallest winning bid.

    A finite-tolerance walk can emit pinched pieces at its stop point (a
    cascade of events squeezed within the stop residual); any piece narrower
    than ``tol`` is below the search's resolution and its mass belongs to
    the bottom atom, where the limit structure puts it.
    """
    if b_min is None:
        b_min = smallest_winning_bid(instance)
    if abs(trace.stop - b_min) > tol:
        raise NumericalError(
            f"walk stopped at {trace.stop}, not at the smallest winning bid {b_min}"
        )
    kept = []
    for s in trace.segments:
        if s.hi - s.lo <= tol or s.hi <= b_min:
            continue
        if s.lo < b_min:
            # the walk's bottom lands within the stop residual of the true
            # smallest winning bid; nothing can win below it, so the piece
            # is clipped there and the sliver joins the atom
            f_lo = kernels.segment_cdf_eval(b_min, s.value, s.hi, s.F_hi,
                                            s.lam_values())
            s = Segment(s.buyer, s.value, b_min, s.hi, f_lo, s.F_hi, s.lam)
        kept.append(s)
    allocated = [0.0] * instance.n
    for s in kept:
        allocated[s.buyer] += s.mass
    atoms = tuple(
        (i, b_min, 1.0 - allocated[i])
        for i in range(instance.n)
        if 1.0 - allocated[i] > ATOM_EPS
    )
    segments = tuple(sorted(kept, key=lambda s: (s.buyer, -s.hi)))
    eq = Equilibrium(
        segments=segments,
        atoms=atoms,
        b_min=b_min,
        b_max=trace.bbar,
    )
    eq.validate()
    return eq


def _degenerate_equilibrium(instance: AuctionInstance, b_min: float) -> Equilibrium:
    """All-atom equilibrium for instances where at most one buyer can outbid b_min.

    Everyone bids the smallest winning bid with all their mass; the Vickrey
    tie-break hands the item to the highest value present, so the single
    buyer with values above b_min wins whenever such a value is drawn.
    """
    atoms = tuple((i, b_min, 1.0) for i in range(instance.n))
    return Equilibrium(segments=(), atoms=atoms, b_min=b_min, b_max=b_min)


def solve(instance: AuctionInstance, tol: float = DEFAULT_TOL,
          max_iter: int = MAX_ITER, deadline: float | None = None) -> SolveReport:
    """Binary search on the largest winning bid until the walk's stop point
    meets the exact smallest winning bid.

    Exits only when both the bracket width and the stop-point residual fall
    below ``tol``.  ``deadline`` is an absolute time.monotonic() stamp for
    cooperative timeouts.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    t0 = time.perf_counter()

    if instance.reserve > 0:
        shifted, shift = apply_reserve(instance, instance.reserve)
        inner = solve(shifted, tol=tol, max_iter=max_iter, deadline=deadline)
        eq = unshift_equilibrium(inner.equilibrium, shift)
        return SolveReport(
            equilibrium=eq,
            b_min=eq.b_min,
            b_max=eq.b_max,
            iterations=inner.iterations,
            bracket_width=inner.bracket_width,
            residual=inner.residual,
            wall_ms=(time.perf_counter() - t0) * 1e3,
        )

    b_min = smallest_winning_bid(instance)
    L = instance.max_value

    contenders = [i for i, b in enumerate(instance.buyers) if b.max_value > b_min]
    if len(contenders) <= 1:
        eq = _degenerate_equilibrium(instance, b_min)
        return SolveReport(eq, b_min, b_min, 0, 0.0, 0.0,
                           (time.perf_counter() - t0) * 1e3)

    ub, lb = L, 0.0
    trace = None
    iterations = 0
    residual = math.inf
    for iterations in range(1, max_iter + 1):
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutExceeded("solve exceeded its deadline")
        bbar = 0.5 * (ub + lb)
        trace = run_descent(instance, bbar)
        if trace.stop > b_min:
            ub = bbar
        else:
            lb = bbar
        residual = abs(trace.stop - b_min)
        if ub - lb < tol and residual < tol:
            break
        if ub - lb <= 4 * math.ulp(ub):
            # the guess is pinned to float resolution but the stop point
            # still misses: the stop is ill-conditioned in the guess here
            # (a consumption equation goes flat near the bottom), so no
            # further iteration can shrink the residual
            raise NumericalError(
                f"stop-point residual {residual} cannot reach tol {tol}: "
                f"bracket exhausted at [{lb}, {ub}]"
            )
    else:
        raise NumericalError(
            f"no convergence in {max_iter} iterations: bracket [{lb}, {ub}], "
            f"residual {residual}"
        )

    eq = finalize(trace, instance, b_min=b_min, tol=max(10 * tol, 1e-9))
    return SolveReport(
        equilibrium=eq,
        b_min=b_min,
        b_max=trace.bbar,
        iterations=iterations,
        bracket_width=ub - lb,
        residual=residual,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )


# ---------------------------------------------------------------------------
# Homogeneous reserve prices


@dataclass(frozen=True)
class ReserveShift:
    """Metadata for mapping a shifted solution back to original bid space."""

    reserve: float
    no_bid_mass: tuple[float, ...]   # per buyer: mass of values at or below the reserve


def apply_reserve(instance: AuctionInstance, r: float) -> tuple[AuctionInstance, ReserveShift]:
    """Reduce a reserve-r auction to a no-reserve one by shifting values down.

    The shifted distribution is G*(x) = G(x + r): values at or below the
    reserve collapse into a value-0 point whose mass is recorded as the
    buyer's no-bid mass (those types cannot profitably clear the reserve).
    """
    if r < 0:
        raise ValidationError("reserve must be nonnegative")
    if r == 0:
        return instance, ReserveShift(0.0, tuple(0.0 for _ in instance.buyers))
    if r >= instance.max_value:
        raise ValidationError("no value exceeds the reserve")
    buyers = []
    dropped = []
    for dist in instance.buyers:
        keep = dist.values > r
        dropped_mass = float(dist.masses[~keep].sum())
        values = [v - r for v in dist.values[keep]]
        masses = [float(m) for m in dist.masses[keep]]
        if dropped_mass > 0:
            values = [0.0] + values
            masses = [dropped_mass] + masses
        buyers.append(ValueDistribution(np.array(values), np.array(masses)))
        dropped.append(dropped_mass)
    return AuctionInstance(tuple(buyers), 0.0), ReserveShift(r, tuple(dropped))


def unshift_equilibrium(eq: Equilibrium, shift: ReserveShift) -> Equilibrium:
    """Map a shifted-space equilibrium back: every bid and value moves up by r."""
    r = shift.reserve
    if r == 0:
        return eq
    segments = tuple(
        Segment(
            buyer=s.buyer,
            value=s.value + r,
            lo=s.lo + r,
            hi=s.hi + r,
            F_lo=s.F_lo,
            F_hi=s.F_hi,
            lam=tuple((b, v + r) for b, v in s.lam),
        )
        for s in eq.segments
    )
    atoms = tuple((b, x + r, m) for b, x, m in eq.atoms)
    return Equilibrium(
        segments=segments,
        atoms=atoms,
        b_min=eq.b_min + r,
        b_max=eq.b_max + r,
        tie_rule=eq.tie_rule,
    )
