"""Consumers of a solved equilibrium: bid CDF evaluation, expected-utility
queries, brute-force best-response verification, and welfare/revenue
functionals for auction-format comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AuctionInstance, Equilibrium, ValidationError

TIE_EPS = 1e-12          # bids this close to the bottom atom share its tie handling
DEVIATION_MARGIN = 0.01  # grid extends 1% of the price scale above the top bid


# ---------------------------------------------------------------------------
# Per-buyer curve: the piecewise closed-form CDF plus the bottom atom


class _BuyerCurve:
    def __init__(self, eq: Equilibrium, buyer: int):
        self.buyer = buyer
        self.b_min = eq.b_min
        segs = sorted(eq.buyer_segments(buyer), key=lambda s: s.lo)
        self.segs = segs
        self.lo = np.array([s.lo for s in segs])
        self.hi = np.array([s.hi for s in segs])
        self.F_lo = np.array([s.F_lo for s in segs])
        self.F_hi = np.array([s.F_hi for s in segs])
        self.atom = eq.atom_mass(buyer)
        self.base = self.F_lo[0] if segs else min(self.atom, 1.0)

    def cdf_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.empty(xs.shape)
        # flat levels: below the bottom atom 0, between pieces the last closed
        # level, above everything 1
        idx = np.searchsorted(self.hi, xs, side="right") if len(self.segs) else None
        if idx is None:
            out.fill(self.atom)
        else:
            levels = np.concatenate(([self.base], self.F_hi))
            out = levels[idx]
        for k, s in enumerate(self.segs):
            mask = (xs >= s.lo) & (xs < s.hi)
            if mask.any():
                out[mask] = _piece_cdf_many(s, xs[mask])
        out[xs < self.b_min] = 0.0
        return out

    def cdf(self, x: float) -> float:
        return float(self.cdf_many(np.array([x]))[0])

    def quantile_bids(self, us):
        """Map uniform draws to (value, bid) pairs by inverting the CDF."""
        us = np.asarray(us, dtype=float)
        bids = np.full(us.shape, self.b_min)
        values = np.full(us.shape, np.nan)
        for s in self.segs:
            mask = (us > s.F_lo) & (us <= s.F_hi)
            if not mask.any():
                continue
            lo = np.full(mask.sum(), s.lo)
            hi = np.full(mask.sum(), s.hi)
            target = us[mask]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                f = _piece_cdf_many(s, mid)
                lower = f < target
                lo[lower] = mid[lower]
                hi[~lower] = mid[~lower]
            bids[mask] = 0.5 * (lo + hi)
            values[mask] = s.value
        return values, bids


def _piece_cdf_many(seg, xs):
    lam = seg.lam_values()
    k = len(lam)
    res = np.full(xs.shape, seg.F_hi)
    res *= (seg.value - xs) / max(seg.value - seg.hi, 1e-300)
    prod = np.ones(xs.shape)
    for vj in lam:
        prod *= (vj - seg.hi) / np.maximum(vj - xs, 1e-300)
    return res * prod ** (1.0 / (k - 1))


def _piece_pdf_many(seg, xs):
    """Density on a piece: F(x) * h(x) in closed form."""
    lam = seg.lam_values()
    k = len(lam)
    F = _piece_cdf_many(seg, xs)
    s = np.zeros(xs.shape)
    for vj in lam:
        s += 1.0 / np.maximum(vj - xs, 1e-300)
    h = s / (k - 1) - 1.0 / np.maximum(seg.value - xs, 1e-300)
    return F * h


def cdf(eq: Equilibrium, buyer: int, x: float) -> float:
    """Bid CDF of one buyer: piecewise closed form, flat across gaps, one
    atom jump at the bottom, 0 below all mass and 1 above."""
    return _BuyerCurve(eq, buyer).cdf(x)


def cdf_many(eq: Equilibrium, buyer: int, xs) -> np.ndarray:
    return _BuyerCurve(eq, buyer).cdf_many(xs)


# ---------------------------------------------------------------------------
# Atom decomposition and expected utility


def atom_decomposition(eq: Equilibrium, instance: AuctionInstance) -> list[dict[float, float]]:
    """Per buyer: which value types make up the bottom atom, by leftover mass.

    A type's leftover is its prior mass minus everything its CDF pieces
    allocated; the canonical construction bids all of it at the bottom.
    """
    n = instance.n
    allocated = [dict() for _ in range(n)]
    for s in eq.segments:
        dist = instance.buyers[s.buyer]
        j = int(np.argmin(np.abs(dist.values - s.value)))
        if abs(dist.values[j] - s.value) > 1e-6 * max(1.0, abs(s.value)):
            raise ValidationError(
                f"segment value {s.value} does not match buyer {s.buyer}'s support"
            )
        key = float(dist.values[j])
        allocated[s.buyer][key] = allocated[s.buyer].get(key, 0.0) + s.mass
    out = []
    for i, dist in enumerate(instance.buyers):
        rem = {}
        for v, m in zip(dist.values, dist.masses):
            left = float(m) - allocated[i].get(float(v), 0.0)
            if left > 1e-12:
                rem[float(v)] = left
        out.append(rem)
    return out


def utility(eq: Equilibrium, instance: AuctionInstance, buyer: int, v: float,
            b: float, tie: str = "vickrey") -> float:
    """Expected utility of bidding b with value v against the equilibrium.

    (v - b) times the win probability.  At the bottom atom the Vickrey rule
    applies: tied mass is won only against tied types whose value is
    strictly smaller.  ``tie='random'`` splits ties uniformly instead (the
    approximate-equilibrium reading).
    """
    if b < 0:
        raise ValidationError("bids are nonnegative")
    curves = [_BuyerCurve(eq, j) for j in range(instance.n)]
    decomp = atom_decomposition(eq, instance)
    return _utility_inner(eq, instance, curves, decomp, buyer, v, b, tie)


def _utility_inner(eq, instance, curves, decomp, buyer, v, b, tie="vickrey"):
    at_atom = abs(b - eq.b_min) <= TIE_EPS
    if not at_atom:
        win = 1.0
        for j in range(instance.n):
            if j != buyer:
                win *= curves[j].cdf(b)
        return (v - b) * win

    if tie == "vickrey":
        win = 1.0
        for j in range(instance.n):
            if j == buyer:
                continue
            below = curves[j].cdf(b) - curves[j].atom
            beaten = sum(m for tv, m in decomp[j].items() if tv < v)
            win *= below + beaten
        return (v - b) * win

    # random tie-breaking: enumerate which opponents land exactly on the atom
    opponents = [j for j in range(instance.n) if j != buyer]
    win = 0.0
    for mask in range(1 << len(opponents)):
        p = 1.0
        tied = 0
        for k, j in enumerate(opponents):
            curve = curves[j]
            if mask >> k & 1:
                p *= curve.atom
                tied += 1
            else:
                p *= curve.cdf(b) - curve.atom
        if p > 0.0:
            win += p / (tied + 1)
    return (v - b) * win


def epsilon_shift(eq: Equilibrium, instance: AuctionInstance, eps: float) -> Equilibrium:
    """The approximate equilibrium that needs no tie-break assumption.

    Every atom type whose value exceeds the bottom bid moves its atom up by
    ``eps``; the result is an eps-best-response profile under uniformly
    random tie resolution.  The output intentionally violates the
    atoms-only-at-the-bottom invariant, so it is not validated.
    """
    decomp = atom_decomposition(eq, instance)
    atoms = []
    for i, rem in enumerate(decomp):
        stay = sum(m for v, m in rem.items() if v <= eq.b_min)
        move = sum(m for v, m in rem.items() if v > eq.b_min)
        if stay > 1e-12:
            atoms.append((i, eq.b_min, stay))
        if move > 1e-12:
            atoms.append((i, eq.b_min + eps, move))
    return Equilibrium(
        segments=eq.segments,
        atoms=tuple(atoms),
        b_min=eq.b_min,
        b_max=max(eq.b_max, eq.b_min + eps),
        tie_rule="random",
    )


# ---------------------------------------------------------------------------
# Best-response verification


@dataclass(frozen=True)
class VerificationCell:
    buyer: int
    value: float
    prescribed_bid: float
    prescribed_utility: float
    best_bid: float
    best_utility: float
    regret: float


@dataclass(frozen=True)
class VerificationReport:
    cells: tuple[VerificationCell, ...]
    max_regret: float
    grid_size: int
    eps: float

    @property
    def passed(self) -> bool:
        return self.max_regret <= self.eps


def verify_bne(eq: Equilibrium, instance: AuctionInstance, eps: float = 1e-4,
               grid: int = 2000) -> VerificationReport:
    """Compare every type's prescribed utility against a dense deviation grid.

    The grid spans [0, min(v, b_max + margin)] per type and always includes
    every segment endpoint and the atom bid plus/minus a hair, where regret
    maxima live.
    """
    if grid < 100:
        raise ValidationError("deviation grid must have at least 100 points")
    curves = [_BuyerCurve(eq, j) for j in range(instance.n)]
    decomp = atom_decomposition(eq, instance)
    margin = DEVIATION_MARGIN * instance.max_value
    breakpoints = sorted(
        {s.lo for s in eq.segments}
        | {s.hi for s in eq.segments}
        | {eq.b_min, max(eq.b_min - 1e-9, 0.0), eq.b_min + 1e-9}
    )
    cells = []
    for i, dist in enumerate(instance.buyers):
        pieces = [s for s in eq.buyer_segments(i)]
        for v, m in zip(dist.values, dist.masses):
            v = float(v)
            own = [s for s in pieces if abs(s.value - v) <= 1e-6 * max(1.0, v)]
            prescribed_bid = max(s.hi for s in own) if own else eq.b_min
            u0 = _utility_inner(eq, instance, curves, decomp, i, v, prescribed_bid)
            top = min(v, eq.b_max + margin)
            xs = np.linspace(0.0, max(top, 0.0), grid)
            extra = [b for b in breakpoints if b <= top]
            xs = np.unique(np.concatenate([xs, extra, [prescribed_bid]]))
            # vectorized utilities away from the atom, exact tie logic on it
            win = np.ones(xs.shape)
            for j in range(instance.n):
                if j != i:
                    win *= curves[j].cdf_many(xs)
            utils = (v - xs) * win
            near_atom = np.abs(xs - eq.b_min) <= TIE_EPS
            for k in np.flatnonzero(near_atom):
                utils[k] = _utility_inner(eq, instance, curves, decomp, i, v, xs[k])
            best = int(np.argmax(utils))
            cells.append(
                VerificationCell(
                    buyer=i,
                    value=v,
                    prescribed_bid=prescribed_bid,
                    prescribed_utility=u0,
                    best_bid=float(xs[best]),
                    best_utility=float(utils[best]),
                    regret=float(utils[best] - u0),
                )
            )
    max_regret = max(c.regret for c in cells)
    return VerificationReport(tuple(cells), max_regret, grid, eps)


# ---------------------------------------------------------------------------
# Welfare and revenue


@dataclass(frozen=True)
class WelfareReport:
    wel_f: float
    wel_s: float
    ratio: float


def _support_union(instance: AuctionInstance) -> np.ndarray:
    return np.unique(np.concatenate([b.values for b in instance.buyers]))


def _expected_max(cdfs_at, points) -> float:
    """E[max] from the product of CDF columns evaluated on the union grid."""
    prod = np.prod(cdfs_at, axis=0)
    prev = np.concatenate(([0.0], prod[:-1]))
    return float(np.sum(points * (prod - prev)))


def expected_max_value(instance: AuctionInstance) -> float:
    pts = _support_union(instance)
    cdfs = np.array([[b.cdf(t) for t in pts] for b in instance.buyers])
    return _expected_max(cdfs, pts)


def expected_second_value(instance: AuctionInstance) -> float:
    """E[second-highest value]: exact, via order-statistic CDF products."""
    pts = _support_union(instance)
    cdfs = np.array([[b.cdf(t) for t in pts] for b in instance.buyers])
    all_le = np.prod(cdfs, axis=0)
    second_le = all_le.copy()
    for i in range(len(instance.buyers)):
        others = np.prod(np.delete(cdfs, i, axis=0), axis=0)
        second_le += (1.0 - cdfs[i]) * others
    prev = np.concatenate(([0.0], second_le[:-1]))
    return float(np.sum(pts * (second_le - prev)))


def _atom_tie_term(eq, instance, decomp, weight_fn) -> float:
    """Expected weight when everybody lands on the bottom atom.

    The Vickrey resolution awards the item to the highest tied value, so the
    term reduces to an expected-max computation over the per-buyer atom
    decompositions (unnormalized, which folds in the all-tie probability).
    """
    pts = sorted({v for rem in decomp for v in rem})
    if not pts:
        return 0.0
    cols = []
    for rem in decomp:
        cum = []
        acc = 0.0
        for t in pts:
            acc = sum(m for v, m in rem.items() if v <= t)
            cum.append(acc)
        cols.append(cum)
    prod = np.prod(np.array(cols), axis=0)
    prev = np.concatenate(([0.0], prod[:-1]))
    weights = np.array([weight_fn(t) for t in pts])
    return float(np.sum(weights * (prod - prev)))


def _win_integrals(eq: Equilibrium, instance: AuctionInstance, integrand: str,
                   tol: float = 1e-9) -> float:
    """Sum over buyers and pieces of int f_i(x) * prod_j F_j(x) * w(x) dx.

    ``integrand`` 'value' weighs by the piece's value (welfare), 'bid' by x
    (revenue).  Composite Gauss-Legendre per piece, node count doubled until
    the total moves less than ``tol``.
    """
    curves = [_BuyerCurve(eq, j) for j in range(instance.n)]

    def total(nodes: int) -> float:
        z, w = np.polynomial.legendre.leggauss(nodes)
        acc = 0.0
        for s in eq.segments:
            if s.hi - s.lo <= 0:
                continue
            mid = 0.5 * (s.lo + s.hi)
            half = 0.5 * (s.hi - s.lo)
            xs = mid + half * z
            f = _piece_pdf_many(s, xs)
            win = np.ones(xs.shape)
            for j in range(instance.n):
                if j != s.buyer:
                    win *= curves[j].cdf_many(xs)
            weight = xs if integrand == "bid" else s.value
            acc += half * float(np.sum(w * f * win * weight))
        return acc

    nodes = 64
    prev = total(nodes)
    while nodes < 1024:
        nodes *= 2
        cur = total(nodes)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


def welfare(eq: Equilibrium, instance: AuctionInstance) -> WelfareReport:
    """Expected winner value under the equilibrium vs. under truthful
    second-price bidding (the efficient benchmark)."""
    decomp = atom_decomposition(eq, instance)
    wel_f = _win_integrals(eq, instance, "value")
    wel_f += _atom_tie_term(eq, instance, decomp, lambda t: t)
    wel_s = expected_max_value(instance)
    return WelfareReport(wel_f=wel_f, wel_s=wel_s, ratio=wel_f / wel_s)


def revenue(eq: Equilibrium, instance: AuctionInstance) -> tuple[float, float]:
    """(first-price expected winning bid, second-price expected payment)."""
    decomp = atom_decomposition(eq, instance)
    rev_f = _win_integrals(eq, instance, "bid")
    rev_f += _atom_tie_term(eq, instance, decomp, lambda t: eq.b_min)
    rev_s = expected_second_value(instance)
    return rev_f, rev_s


# ---------------------------------------------------------------------------
# Monte Carlo cross-check support


def sample_outcomes(eq: Equilibrium, instance: AuctionInstance, rng, size: int):
    """Draw joint (value, bid) profiles and resolve the auction per sample.

    Returns (winner_values, winning_bids) arrays; ties at the bottom atom are
    resolved by the Vickrey rule.
    """
    n = instance.n
    curves = [_BuyerCurve(eq, j) for j in range(n)]
    decomp = atom_decomposition(eq, instance)
    values = np.empty((n, size))
    bids = np.empty((n, size))
    for i in range(n):
        us = rng.random(size)
        v, b = curves[i].quantile_bids(us)
        at_atom = np.isnan(v)
        if at_atom.any():
            rem = decomp[i]
            keys = np.array(sorted(rem))
            cum = np.cumsum([rem[k] for k in sorted(rem)])
            draw = us[at_atom]  # uniform on (0, atom] by construction
            v_at = keys[np.searchsorted(cum, draw, side="left").clip(0, len(keys) - 1)]
            v[at_atom] = v_at
            b[at_atom] = eq.b_min
        values[i] = v
        bids[i] = b
    top = bids.max(axis=0)
    winner_vals = np.empty(size)
    for s in range(size):
        tied = np.flatnonzero(bids[:, s] >= top[s] - 1e-15)
        winner_vals[s] = values[tied, s].max()
    return winner_vals, top
