"""Backward walk through bid space for one guess of the largest winning bid.

Starting from a guess ``bbar``, buyers enter a *bidding set* from a waiting
list ordered by their largest unconsumed value, bid along closed-form CDF
pieces, and leave once the probability mass of their current value is used
up.  The walk stops when fewer than two buyers remain active (or bid 0 is
reached) and reports the stop point, which the outer solver compares against
the exact smallest winning bid.

No differential equations are solved: every piece of every bid CDF has a
closed form, and change points are located by bisection on monotone
functions of the bid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import AuctionInstance, NumericalError, Segment, ValidationError

ROOT_TOL = 1e-12   # absolute bisection tolerance on bid coordinates
TIE_TOL = 1e-9     # change points closer than this are processed together


@dataclass
class BidderState:
    """Mutable per-buyer cursor: which value is being consumed and at what CDF level."""

    buyer: int
    ptr: int          # index of the largest unconsumed value
    level: float      # bid CDF at the current bid (1 until the buyer first enters)
    in_set: bool


@dataclass(frozen=True)
class Event:
    """One change point: who entered and who left the bidding set."""

    bid: float
    entered: tuple[tuple[int, float], ...]
    left: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class DescentTrace:
    """Everything one walk produced: events, CDF pieces, and the stop point."""

    bbar: float
    events: tuple[Event, ...]
    segments: tuple[Segment, ...]
    stop: float
    m: int            # total number of discrete values in the instance

    @property
    def event_count(self) -> int:
        return len(self.events)

    def buyer_segments(self, i: int) -> list[Segment]:
        return [s for s in self.segments if s.buyer == i]

    def to_dict(self) -> dict:
        return {
            "bbar": self.bbar,
            "stop": self.stop,
            "event_count": self.event_count,
            "events": [
                {
                    "bid": e.bid,
                    "entered": [{"buyer": b, "value": v} for b, v in e.entered],
                    "left": [{"buyer": b, "value": v} for b, v in e.left],
                }
                for e in self.events
            ],
            "segments": [
                {
                    "buyer": s.buyer,
                    "value": s.value,
                    "lo": s.lo,
                    "hi": s.hi,
                    "F_lo": s.F_lo,
                    "F_hi": s.F_hi,
                    "lambda": [{"buyer": b, "value": v} for b, v in s.lam],
                }
                for s in self.segments
            ],
        }


# ---------------------------------------------------------------------------
# Pointwise operations (validated wrappers around the kernels)


def h(x: float, lam_values, v: float) -> float:
    """Membership derivative (1/(k-1)) * sum 1/(v_j-x) - 1/(v-x).

    For a bidding-set member, pass the full membership snapshot (including
    v itself); for an entry candidate, pass the current members only.
    """
    lam = np.asarray(lam_values, dtype=float)
    if len(lam) < 2:
        raise ValidationError("membership snapshot needs at least two values")
    if v <= x or np.any(lam <= x):
        raise ValidationError("all values must exceed the bid")
    return kernels.h_value(x, lam, v)


def virtual_value(x: float, lam_values) -> float:
    """The aggregate value phi* with 1/(phi*-x) = (1/(k-1)) * sum 1/(v_j-x)."""
    lam = np.asarray(lam_values, dtype=float)
    if len(lam) < 2:
        raise ValidationError("membership snapshot needs at least two values")
    if np.any(lam <= x):
        raise ValidationError("all values must exceed the bid")
    return kernels.phi_star(x, lam)


def segment_cdf(seg: Segment, x: float) -> float:
    """Evaluate a piece's closed-form CDF at a bid inside [lo, hi]."""
    if not (seg.lo - 1e-12 <= x <= seg.hi + 1e-12):
        raise ValidationError(f"bid {x} outside segment [{seg.lo}, {seg.hi}]")
    return kernels.segment_cdf_eval(x, seg.value, seg.hi, seg.F_hi, seg.lam_values())


def predict_enter_point(value: float, bid: float, lam_values, tol: float = ROOT_TOL):
    """Largest bid below ``bid`` where a waiting value would enter, or None.

    Valid while the membership stays fixed below ``bid``; the result is the
    sign change of h for the candidate, located by bisection (the entry
    condition region is an interval because phi* is strictly increasing).
    """
    lam = np.ascontiguousarray(lam_values, dtype=float)
    r = kernels.solve_enter(value, lam, bid, tol)
    return None if math.isnan(r) else r


def predict_leave_point(value: float, bid: float, F_bid: float, G_below: float,
                        lam_values, tol: float = ROOT_TOL):
    """Bid where the member's current value mass is fully consumed.

    None when the member holds its lowest value (G below it is zero, so the
    consumption equation has no solution).  NaN when the consumption point
    lies below bid 0: the member is still mid-consumption at the floor of
    the bid space, which forces the walk to coast down to 0 rather than
    stop where it stands.
    """
    if G_below <= 0.0:
        return None
    drop = math.log(F_bid) - math.log(G_below)
    if drop <= 0.0:
        return bid
    lam = np.ascontiguousarray(lam_values, dtype=float)
    return kernels.solve_leave(value, lam, bid, drop, tol)


# ---------------------------------------------------------------------------
# The walk itself


class DescentState:
    """Mutable state of one walk; exposed for the operation-level tests."""

    def __init__(self, instance: AuctionInstance, bbar: float):
        self.instance = instance
        self.bbar = float(bbar)
        self.b = float(bbar)
        self.states = [
            BidderState(i, dist.size - 1, 1.0, False)
            for i, dist in enumerate(instance.buyers)
        ]
        self.events: list[Event] = []
        self.segments: list[Segment] = []

    # -- helpers ----------------------------------------------------------

    def members(self) -> list[BidderState]:
        return [s for s in self.states if s.in_set]

    def waiting(self) -> list[BidderState]:
        return [s for s in self.states if not s.in_set]

    def member_values(self) -> np.ndarray:
        vals = [
            self.instance.buyers[s.buyer].values[s.ptr]
            for s in self.states
            if s.in_set
        ]
        return np.array(vals, dtype=float)

    def snapshot(self) -> tuple[tuple[int, float], ...]:
        return tuple(
            (s.buyer, float(self.instance.buyers[s.buyer].values[s.ptr]))
            for s in self.states
            if s.in_set
        )

    def value_of(self, s: BidderState) -> float:
        return float(self.instance.buyers[s.buyer].values[s.ptr])

    def g_below(self, s: BidderState) -> float:
        return self.instance.buyers[s.buyer].cum_below(s.ptr)

    # -- spec operations ---------------------------------------------------

    def next_change_point(self):
        """Maximum over all per-buyer enter/leave predictions.

        Returns (bid, triggers) where triggers is a list of (buyer, kind)
        with kind 'enter' or 'leave'; multiple buyers may tie.  When nothing
        can change at a nonnegative bid there are two distinct outcomes:
        (0.0, []) if some member is still mid-consumption at the floor of
        the bid space (the walk coasts down to 0 and is clipped there,
        keeping the stop on the correct side of the outer search), and
        (None, []) if no change is pending at all (the walk terminates where
        it stands: nothing in the structure changes below the current bid).
        """
        lam = self.member_values()
        preds: list[tuple[float, int, str]] = []
        pending_below_floor = False
        for s in self.states:
            if s.in_set:
                r = predict_leave_point(
                    self.value_of(s), self.b, s.level, self.g_below(s), lam
                )
                if r is None:
                    continue
                if math.isnan(r) or r <= 0.0:
                    pending_below_floor = True
                else:
                    preds.append((r, s.buyer, "leave"))
            else:
                r = predict_enter_point(self.value_of(s), self.b, lam)
                if r is not None:
                    preds.append((r, s.buyer, "enter"))
        if not preds:
            return (0.0, []) if pending_below_floor else (None, [])
        best = max(r for r, _, _ in preds)
        triggers = [(buyer, kind) for r, buyer, kind in preds if r >= best - TIE_TOL]
        return best, triggers

    def update_bidding_set(self, bid: float, triggers) -> tuple[list, list]:
        """Process one change point: removals first, then admissions.

        Removals snap the leaver's CDF level to the exact step of its value
        distribution and advance its value pointer.  Admissions run over the
        waiting list in decreasing order of unconsumed value and stop at the
        first refusal (a refused largest value implies every smaller value
        is refused too).
        """
        left = []
        for buyer, kind in triggers:
            if kind != "leave":
                continue
            s = self.states[buyer]
            left.append((buyer, self.value_of(s)))
            s.level = self.g_below(s)
            s.ptr -= 1
            s.in_set = False

        entered = []
        while True:
            waiting = sorted(
                self.waiting(), key=lambda s: (-self.value_of(s), s.buyer)
            )
            admitted = False
            for s in waiting:
                v = self.value_of(s)
                if v <= bid:
                    break
                members = self.members()
                k = len(members)
                if k == 0:
                    ok = True
                elif k == 1:
                    # a lone member needs a competitor, but pairing two
                    # lowest values is pointless: neither mass can ever be
                    # consumed, so the pair would just coast below this bid
                    # and the stop point would lose its continuity in the
                    # guess; any other pairing still has a consumption ahead
                    ok = s.ptr > 0 or members[0].ptr > 0
                else:
                    ok = kernels.h_value(bid, self.member_values(), v) >= 0.0
                if ok:
                    s.in_set = True
                    entered.append((s.buyer, v))
                    admitted = True
                    break  # re-sort: the next largest may now differ
                elif k >= 2:
                    break  # largest unconsumed fails the h test: so does everyone below
                # all-sentinel pairing refused: smaller candidates may still
                # qualify, keep scanning
            if not admitted:
                break
        return entered, left


def run_descent(instance: AuctionInstance, bbar: float) -> DescentTrace:
    """Walk downward from the guess ``bbar`` and report the stop point.

    Every (buyer, value) pair can trigger at most one entry and one exit, so
    the walk records at most 2m change points for m total values.
    """
    L = instance.max_value
    if not (0.0 < bbar < L):
        raise ValidationError(f"guess {bbar} outside (0, {L})")

    st = DescentState(instance, bbar)
    entered, _ = st.update_bidding_set(bbar, [])
    st.events.append(Event(bbar, tuple(entered), ()))

    max_events = 2 * instance.total_values + 2
    while len(st.members()) >= 2 and st.b > 0.0:
        lam_snapshot = st.snapshot()
        bid, triggers = st.next_change_point()
        if bid is None:
            break  # nothing changes below the current bid: stop here
        leavers = {buyer for buyer, kind in triggers if kind == "leave"}

        # close this stretch's CDF pieces for every active member; a leaver's
        # level snaps to the exact step of its value distribution so the
        # piece's drop equals the value's mass with no root-finding residue
        lam_vals = st.member_values()
        for s in st.members():
            v = st.value_of(s)
            if s.buyer in leavers:
                f_lo = st.g_below(s)
            else:
                f_lo = kernels.segment_cdf_eval(bid, v, st.b, s.level, lam_vals)
            if bid < st.b:
                st.segments.append(
                    Segment(s.buyer, v, bid, st.b, f_lo, s.level, lam_snapshot)
                )
            s.level = f_lo

        if bid >= st.b:
            raise NumericalError(
                f"change point {bid} does not descend below {st.b}; "
                "multiple roots or loss of monotonicity detected"
            )

        if not triggers:
            # clipped at the floor mid-consumption: no membership change,
            # the pieces above were closed with their closed-form levels
            st.events.append(Event(0.0, (), ()))
            st.b = 0.0
            break

        entered, left = st.update_bidding_set(bid, triggers)
        if not entered and not left:
            raise NumericalError(f"no membership change at change point {bid}")
        st.events.append(Event(bid, tuple(entered), tuple(left)))
        st.b = bid
        if len(st.events) > max_events:
            raise NumericalError("event budget 2m exceeded; instance is numerically degenerate")

    return DescentTrace(
        bbar=bbar,
        events=tuple(st.events),
        segments=tuple(st.segments),
        stop=st.b,
        m=instance.total_values,
    )
