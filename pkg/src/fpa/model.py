"""Domain types for discrete-value first-price auctions.

Values and probabilities are plain IEEE doubles; all downstream numerics are
tolerance-based, so no rational arithmetic is used anywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

MASS_SUM_TOL = 1e-12      # strict tolerance for an already-normalized distribution
PARSE_SUM_TOL = 1e-9      # documents may be off by this much and get renormalized


class ValidationError(ValueError):
    """Raised when an instance or equilibrium violates its invariants."""


class NumericalError(RuntimeError):
    """Raised when an algorithm cannot reach its stated tolerance."""


class TimeoutExceeded(RuntimeError):
    """Raised when a cooperative wall-clock deadline is exceeded."""


@dataclass(frozen=True)
class ValueDistribution:
    """One buyer's finite value support with point masses.

    ``values`` is strictly increasing and nonnegative, ``masses`` are all
    positive and sum to one.  ``cum`` holds the right-continuous CDF steps
    G(v^j) = sum of masses up to j.  Immutable after construction.
    """

    values: np.ndarray
    masses: np.ndarray
    cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        values.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masses", masses)
        if values.ndim != 1 or masses.ndim != 1 or len(values) != len(masses):
            raise ValidationError("values and masses must be 1-d sequences of equal length")
        if len(values) == 0:
            raise ValidationError("empty value support")
        if values[0] < 0:
            raise ValidationError("values must be nonnegative")
        if np.any(np.diff(values) <= 0):
            raise ValidationError("values must be strictly increasing")
        if np.any(masses <= 0):
            raise ValidationError("every mass must be positive")
        if abs(masses.sum() - 1.0) > MASS_SUM_TOL:
            raise ValidationError(f"masses sum to {masses.sum()!r}, expected 1")
        cum = np.cumsum(masses)
        cum[-1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "cum", cum)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    @property
    def min_value(self) -> float:
        return float(self.values[0])

    def cdf(self, v: float) -> float:
        """Right-continuous step evaluation of G at v."""
        j = int(np.searchsorted(self.values, v, side="right"))
        return 0.0 if j == 0 else float(self.cum[j - 1])

    def cum_below(self, j: int) -> float:
        """G(v^{j-1}) for 0-based value index j; 0 below the lowest value."""
        return 0.0 if j == 0 else float(self.cum[j - 1])

    def log_increments(self) -> np.ndarray:
        """ln G(v^j) - ln G(v^{j-1}) for j >= 1 (0-based), length size-1.

        The same quantities the consumption equations integrate against;
        distinct from the plain masses, which are what files store.
        """
        lg = np.log(self.cum)
        return np.diff(lg)


def cdf_at(dist: ValueDistribution, v: float) -> float:
    """Step CDF of a value distribution: 0 below the support, 1 at the top."""
    return dist.cdf(v)


@dataclass(frozen=True)
class AuctionInstance:
    """A sealed-bid first-price auction: n >= 2 buyers, optional homogeneous reserve."""

    buyers: tuple[ValueDistribution, ...]
    reserve: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "buyers", tuple(self.buyers))
        if len(self.buyers) < 2:
            raise ValidationError("an auction needs at least two buyers")
        if self.reserve < 0:
            raise ValidationError("reserve must be nonnegative")
        if self.reserve >= self.max_value:
            raise ValidationError("reserve must lie below the largest value")

    @property
    def n(self) -> int:
        return len(self.buyers)

    @property
    def max_value(self) -> float:
        return max(b.max_value for b in self.buyers)

    @property
    def total_values(self) -> int:
        """m = sum of support sizes; bounds the descent's event count by 2m."""
        return sum(b.size for b in self.buyers)


@dataclass(frozen=True)
class Segment:
    """One fixed-membership piece of one buyer's bid CDF.

    On [lo, hi] the buyer bids with value ``value`` and CDF

        F(x) = F_hi * ((value-x)/(value-hi)) * prod_j ((v_j-hi)/(v_j-x))^(1/(k-1))

    where v_j ranges over the membership snapshot ``lam`` (buyer, value)
    pairs, including this buyer, and k = len(lam).
    """

    buyer: int
    value: float
    lo: float
    hi: float
    F_lo: float
    F_hi: float
    lam: tuple[tuple[int, float], ...]

    @property
    def mass(self) -> float:
        return self.F_hi - self.F_lo

    def lam_values(self) -> np.ndarray:
        return np.array([v for _, v in self.lam], dtype=float)


@dataclass(frozen=True)
class Equilibrium:
    """Per-buyer piecewise bid CDFs plus atoms at the smallest winning bid."""

    segments: tuple[Segment, ...]          # all buyers, sorted (buyer asc, hi desc)
    atoms: tuple[tuple[int, float, float], ...]   # (buyer, bid, mass)
    b_min: float
    b_max: float
    tie_rule: str = "vickrey-among-highest"

    def buyer_segments(self, i: int) -> list[Segment]:
        """Buyer i's pieces ordered by decreasing bid."""
        return [s for s in self.segments if s.buyer == i]

    def atom_mass(self, i: int) -> float:
        return sum(m for b, _, m in self.atoms if b == i)

    def n_buyers(self) -> int:
        tops = {s.buyer for s in self.segments} | {b for b, _, _ in self.atoms}
        return max(tops) + 1 if tops else 0

    def validate(self, tol: float = 1e-8) -> None:
        """Check mass conservation, atom placement and segment ordering."""
        n = self.n_buyers()
        for b, bid, _ in self.atoms:
            if bid > self.b_min + 1e-12:
                raise ValidationError(f"buyer {b} has an atom above b_min")
        for i in range(n):
            segs = self.buyer_segments(i)
            total = sum(s.mass for s in segs) + self.atom_mass(i)
            if abs(total - 1.0) > tol:
                raise ValidationError(f"buyer {i} mass {total} != 1")
            for hi_seg, lo_seg in zip(segs, segs[1:]):
                if lo_seg.hi > hi_seg.lo + 1e-12:
                    raise ValidationError(f"buyer {i} segments overlap")
                if lo_seg.value > hi_seg.value + 1e-12:
                    raise ValidationError(f"buyer {i} larger value bids below smaller")


# ---------------------------------------------------------------------------
# File formats


def parse_instance(text: str) -> AuctionInstance:
    """Parse the instance JSON document.

    Schema: {"buyers": [{"values": [...], "probs": [...]}, ...], "reserve": r?}.
    Mass sums within 1e-9 of one are renormalized, anything further off is
    rejected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed JSON: {e}") from e
    if not isinstance(doc, dict) or "buyers" not in doc:
        raise ValidationError("document must be an object with a 'buyers' array")
    buyers = []
    for idx, spec in enumerate(doc["buyers"]):
        if not isinstance(spec, dict) or "values" not in spec or "probs" not in spec:
            raise ValidationError(f"buyer {idx}: need 'values' and 'probs'")
        values = np.asarray(spec["values"], dtype=float)
        probs = np.asarray(spec["probs"], dtype=float)
        if values.shape != probs.shape:
            raise ValidationError(f"buyer {idx}: values/probs length mismatch")
        s = probs.sum()
        if abs(s - 1.0) > PARSE_SUM_TOL:
            raise ValidationError(f"buyer {idx}: probs sum to {s!r}")
        if abs(s - 1.0) > MASS_SUM_TOL:
            probs = probs / s
        try:
            buyers.append(ValueDistribution(values, probs))
        except ValidationError as e:
            raise ValidationError(f"buyer {idx}: {e}") from e
    reserve = float(doc.get("reserve", 0.0))
    return AuctionInstance(tuple(buyers), reserve)


def format_float(x: float) -> str:
    """Fixed 17-significant-digit decimal text; round-trips doubles exactly."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite value in output: {x}")
    return format(float(x), ".17g")


def dumps_canonical(obj) -> str:
    """Deterministic JSON: sorted keys, fixed float formatting, no whitespace drift."""
    out = []
    _emit(obj, out)
    return "".join(out)


def _emit(obj, out):
    if isinstance(obj, dict):
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if k:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif obj is None:
        out.append("null")
    else:
        out.append(json.dumps(obj))


def serialize_instance(instance: AuctionInstance) -> str:
    doc = {
        "buyers": [
            {"values": list(b.values), "probs": list(b.masses)} for b in instance.buyers
        ],
        "reserve": instance.reserve,
    }
    return dumps_canonical(doc)


def equilibrium_to_dict(eq: Equilibrium) -> dict:
    return {
        "b_min": eq.b_min,
        "b_max": eq.b_max,
        "tie_rule": eq.tie_rule,
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
            for s in eq.segments
        ],
        "atoms": [{"buyer": b, "bid": x, "mass": m} for b, x, m in eq.atoms],
    }


def serialize_equilibrium(eq: Equilibrium) -> str:
    return dumps_canonical(equilibrium_to_dict(eq))


def parse_equilibrium(text: str) -> Equilibrium:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed JSON: {e}") from e
    try:
        segments = tuple(
            Segment(
                buyer=int(s["buyer"]),
                value=float(s["value"]),
                lo=float(s["lo"]),
                hi=float(s["hi"]),
                F_lo=float(s["F_lo"]),
                F_hi=float(s["F_hi"]),
                lam=tuple((int(e["buyer"]), float(e["value"])) for e in s["lambda"]),
            )
            for s in doc["segments"]
        )
        atoms = tuple(
            (int(a["buyer"]), float(a["bid"]), float(a["mass"])) for a in doc["atoms"]
        )
        return Equilibrium(
            segments=segments,
            atoms=atoms,
            b_min=float(doc["b_min"]),
            b_max=float(doc["b_max"]),
            tie_rule=doc.get("tie_rule", "vickrey-among-highest"),
        )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"equilibrium document missing field: {e}") from e
