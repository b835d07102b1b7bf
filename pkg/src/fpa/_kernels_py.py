"""Pure-Python kernel implementations.

Mirror of the compiled extension in ``_kernels.pyx``; the selector in
``kernels`` picks whichever is importable.  Keep the two in sync: both must
produce bitwise-identical results (same operation order everywhere).
"""

from __future__ import annotations

import math

EPS_GAP = 1e-14  # clamp for value-minus-bid gaps inside logs and divisions

BACKEND = "python"


def _as_floats(lam_values):
    """Plain-float view: keeps arithmetic bit-identical to the C kernels
    (numpy scalar pow can differ from libm by an ulp)."""
    return lam_values.tolist() if hasattr(lam_values, "tolist") else lam_values


def h_value(x: float, lam_values, v: float) -> float:
    """Log-derivative of a member's bid CDF on a fixed-membership stretch.

    (1/(k-1)) * sum_j 1/(v_j - x) - 1/(v - x), k = len(lam_values).
    """
    lam_values = _as_floats(lam_values)
    k = len(lam_values)
    s = 0.0
    for vj in lam_values:
        d = vj - x
        if d < EPS_GAP:
            d = EPS_GAP
        s += 1.0 / d
    dv = v - x
    if dv < EPS_GAP:
        dv = EPS_GAP
    return s / (k - 1) - 1.0 / dv


def phi_star(x: float, lam_values) -> float:
    """Virtual value: 1/(phi-x) = (1/(k-1)) * sum_j 1/(v_j-x); always > x."""
    lam_values = _as_floats(lam_values)
    k = len(lam_values)
    s = 0.0
    for vj in lam_values:
        d = vj - x
        if d < EPS_GAP:
            d = EPS_GAP
        s += 1.0 / d
    return x + (k - 1) / s


def capital_h(x: float, lam_values, v: float) -> float:
    """Antiderivative of h_value: ln(v-x) - (1/(k-1)) * sum_j ln(v_j-x)."""
    lam_values = _as_floats(lam_values)
    k = len(lam_values)
    s = 0.0
    for vj in lam_values:
        d = vj - x
        if d < EPS_GAP:
            d = EPS_GAP
        s += math.log(d)
    dv = v - x
    if dv < EPS_GAP:
        dv = EPS_GAP
    return math.log(dv) - s / (k - 1)


def segment_cdf_eval(x: float, v: float, hi: float, F_hi: float, lam_values) -> float:
    """Closed-form bid CDF on a fixed-membership piece, anchored at (hi, F_hi)."""
    lam_values = _as_floats(lam_values)
    k = len(lam_values)
    dv_x = v - x
    dv_hi = v - hi
    if dv_x < EPS_GAP:
        dv_x = EPS_GAP
    if dv_hi < EPS_GAP:
        dv_hi = EPS_GAP
    prod = 1.0
    for vj in lam_values:
        num = vj - hi
        den = vj - x
        if num < EPS_GAP:
            num = EPS_GAP
        if den < EPS_GAP:
            den = EPS_GAP
        prod *= num / den
    return F_hi * (dv_x / dv_hi) * prod ** (1.0 / (k - 1))


def solve_enter(v: float, lam_values, b: float, tol: float) -> float:
    """Largest x in [0, b) where the waiting value v meets the entry condition.

    The condition h_value(x) >= 0 holds on a downward-closed interval of
    bids (the virtual value is strictly increasing in x on a fixed
    stretch), so bisection on the sign of h applies.  Bisecting h itself —
    the same expression the admission step re-evaluates — keeps the two
    float-identical at the returned point.  Returns NaN when the condition
    fails everywhere down to bid 0.
    """
    if h_value(0.0, lam_values, v) < 0.0:
        return math.nan
    if h_value(b, lam_values, v) >= 0.0:
        return b
    lo, hi = 0.0, b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h_value(mid, lam_values, v) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def solve_leave(v: float, lam_values, b: float, drop: float, tol: float) -> float:
    """Bid x < b at which a member's CDF has fallen by log factor ``drop``.

    Solves capital_h(b) - capital_h(x) = drop, with drop = ln F(b) - ln G
    (the remaining log mass of the member's current value).  capital_h is
    nondecreasing in x because h_value >= 0 for members.  Returns NaN when
    the solution lies below bid 0.
    """
    target = capital_h(b, lam_values, v) - drop
    if capital_h(0.0, lam_values, v) > target:
        return math.nan
    lo, hi = 0.0, b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if capital_h(mid, lam_values, v) <= target:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Baseline: explicit Euler stepping of the inverse-bid ODE system.
#
# Per-buyer densities are piecewise linear (triangles plus a uniform floor).
# They arrive as flattened tables: buyer i's intervals occupy rows
# ioff[i]..ioff[i+1]-1 of dens_a/dens_c/cdf_left (density f(t) = a*t + c,
# CDF accumulated at the interval's left breakpoint) and its breakpoints
# occupy boff[i]..boff[i+1]-1 of breaks (one more break than intervals).

STATUS_OK = 0          # loop condition t_i > b failed: normal exit
STATUS_NONFINITE = 1   # derivative blew up (zero density or overflow)
STATUS_STEP_CAP = 2    # max_steps reached


def _pdf_cdf(t, i, ioff, boff, breaks, dens_a, dens_c, cdf_left, floor_ext):
    blo = boff[i]
    bhi = boff[i + 1] - 1
    if t <= breaks[blo]:
        return floor_ext[i], 0.0
    if t >= breaks[bhi]:
        return floor_ext[i], 1.0
    lo, hi = blo, bhi
    while hi - lo > 1:  # find j with breaks[j] <= t < breaks[j+1]
        mid = (lo + hi) // 2
        if breaks[mid] <= t:
            lo = mid
        else:
            hi = mid
    seg = ioff[i] + (lo - blo)
    a = dens_a[seg]
    c = dens_c[seg]
    x0 = breaks[lo]
    f = a * t + c
    F = cdf_left[seg] + 0.5 * a * (t * t - x0 * x0) + c * (t - x0)
    return f, F


def euler_shoot(t0, bbar, step, ioff, boff, breaks, dens_a, dens_c, cdf_left,
                floor_ext, max_steps, traj):
    """Explicit Euler loop of the continuous backward-shooting method.

    The fixed-step update t_i <- t_i - t_i'(b)*step, b <- b - step, running
    while every t_i stays above b; all derivatives are taken at the same
    state before any update.  ``floor_ext`` is the density used outside a
    buyer's padded support (0 reproduces the strict definition and makes an
    out-of-support state a hard error).  ``traj`` receives one row of
    t-values per step (row 0 is the initial state).  Returns
    (b_exit, n_rows, status).
    """
    n = len(t0)
    t = [float(x) for x in t0]
    b = float(bbar)
    for i in range(n):
        traj[0, i] = t[i]
    rows = 1
    deriv = [0.0] * n
    for _ in range(max_steps):
        for i in range(n):
            if t[i] <= b:
                return b, rows, STATUS_OK
        inv_sum = 0.0
        for i in range(n):
            d = t[i] - b
            if d < EPS_GAP:
                d = EPS_GAP
            inv_sum += 1.0 / d
        for i in range(n):
            f, F = _pdf_cdf(t[i], i, ioff, boff, breaks, dens_a, dens_c,
                            cdf_left, floor_ext)
            if f <= 0.0:
                return b, rows, STATUS_NONFINITE
            d = t[i] - b
            if d < EPS_GAP:
                d = EPS_GAP
            deriv[i] = (F / f) * (inv_sum / (n - 1) - 1.0 / d)
            if not math.isfinite(deriv[i]):
                return b, rows, STATUS_NONFINITE
        for i in range(n):
            t[i] = t[i] - deriv[i] * step
        b = b - step
        if rows < traj.shape[0]:
            for i in range(n):
                traj[rows, i] = t[i]
            rows += 1
    return b, rows, STATUS_STEP_CAP
