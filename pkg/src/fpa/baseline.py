"""Continuous-approximation comparator.

Discrete values are smeared into triangle densities over a uniform floor,
and the inverse-bid functions are integrated downward with a fixed-step
explicit Euler loop.  The loop is intentionally not stabilized: its early
termination and oscillation near steep density ratios are the behaviors the
comparison experiments are about.  A clamp flag exists only to keep runtime
comparisons fair when those blow-ups would stall a benchmark.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import (
    AuctionInstance,
    TimeoutExceeded,
    ValidationError,
    ValueDistribution,
)
from .solver import smallest_winning_bid

# Calibrated so the walk reproduces the documented failure signatures on the
# comparison fixtures (early termination around 0.12 on the six-buyer
# instance, increment-sign oscillation on the three-buyer one); the triangle
# half-width still satisfies the 2w gap constraint on every fixture.
DEFAULT_W = 0.01
DEFAULT_EPS_MIX = 2e-3
DEFAULT_STEP = 5e-5


@dataclass(frozen=True)
class SmoothedDistribution:
    """Piecewise-linear density: triangles of half-width w at each value,
    mixed with a uniform floor over the padded support."""

    source: ValueDistribution
    w: float
    eps_mix: float
    floor: float                     # uniform floor density u
    breaks: np.ndarray               # interval boundaries, ascending
    dens_a: np.ndarray               # density slope per interval
    dens_c: np.ndarray               # density intercept per interval
    cdf_left: np.ndarray             # CDF at each interval's left boundary

    def pdf(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        j = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0,
                    len(self.dens_a) - 1)
        out = self.dens_a[j] * t + self.dens_c[j]
        out[(t < self.breaks[0]) | (t > self.breaks[-1])] = 0.0
        return float(out[0]) if scalar else out

    def cdf(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        j = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0,
                    len(self.dens_a) - 1)
        x0 = self.breaks[j]
        a = self.dens_a[j]
        c = self.dens_c[j]
        out = self.cdf_left[j] + 0.5 * a * (t * t - x0 * x0) + c * (t - x0)
        out[t <= self.breaks[0]] = 0.0
        out[t >= self.breaks[-1]] = 1.0
        return float(out[0]) if scalar else out


def smooth(instance: AuctionInstance, w: float = DEFAULT_W,
           eps_mix: float = DEFAULT_EPS_MIX) -> list[SmoothedDistribution]:
    """Smear every buyer's discrete values into triangles plus a floor.

    Requires adjacent values to be more than 2w apart so triangles stay
    disjoint.  The instance is expected in unit scale (see rescale_unit).
    """
    if not (0 < eps_mix < 1):
        raise ValidationError("mix weight must lie in (0,1)")
    if w <= 0:
        raise ValidationError("triangle half-width must be positive")
    out = []
    for dist in instance.buyers:
        v = dist.values
        if len(v) > 1 and np.min(np.diff(v)) <= 2 * w:
            raise ValidationError(
                f"adjacent values closer than 2w={2*w}; smoothing would overlap"
            )
        u = 1.0 / (v[-1] - v[0] + 2 * w)
        lo = v[0] - w
        hi = v[-1] + w
        breaks = [lo]
        slopes = []
        intercepts = []
        keep = 1.0 - eps_mix
        for k, (vk, pk) in enumerate(zip(v, dist.masses)):
            a = pk * keep / (w * w)
            if vk - w > breaks[-1]:          # floor gap before this triangle
                breaks.append(vk - w)
                slopes.append(0.0)
                intercepts.append(eps_mix * u)
            breaks.append(vk)                # rising edge
            slopes.append(a)
            intercepts.append(eps_mix * u - a * (vk - w))
            breaks.append(vk + w)            # falling edge
            slopes.append(-a)
            intercepts.append(eps_mix * u + a * (vk + w))
        if breaks[-1] < hi:
            breaks.append(hi)
            slopes.append(0.0)
            intercepts.append(eps_mix * u)
        breaks = np.array(breaks)
        dens_a = np.array(slopes)
        dens_c = np.array(intercepts)
        cdf_left = np.zeros(len(breaks))
        for j in range(len(dens_a)):
            x0, x1 = breaks[j], breaks[j + 1]
            cdf_left[j + 1] = cdf_left[j] + (
                0.5 * dens_a[j] * (x1 * x1 - x0 * x0) + dens_c[j] * (x1 - x0)
            )
        if abs(cdf_left[-1] - 1.0) > 1e-9:
            raise ValidationError("smoothed density does not integrate to 1")
        out.append(
            SmoothedDistribution(dist, w, eps_mix, u, breaks, dens_a, dens_c,
                                 cdf_left)
        )
    return out


def rescale_unit(instance: AuctionInstance) -> tuple[AuctionInstance, float]:
    """Bring values into [0, 1]: divide by the top value when it exceeds 1,
    leave instances that already fit untouched."""
    if instance.reserve != 0:
        raise ValidationError("the continuous baseline does not handle reserves")
    L = max(1.0, instance.max_value)
    if L == 1.0:
        return instance, 1.0
    buyers = tuple(
        ValueDistribution(b.values / L, b.masses) for b in instance.buyers
    )
    return AuctionInstance(buyers, 0.0), L


def ode_rhs(ts, b: float, smoothed: list[SmoothedDistribution]) -> np.ndarray:
    """Inverse-bid derivatives dt_i/db for the continuous system.

    (F_i(t_i)/f_i(t_i)) * [ (1/(n-1)) * sum_j 1/(t_j-b) - 1/(t_i-b) ].
    """
    ts = np.asarray(ts, dtype=float)
    if np.any(ts <= b):
        raise ValidationError("inverse-bid values must stay above the bid")
    n = len(ts)
    inv = 1.0 / (ts - b)
    out = np.empty(n)
    for i, sm in enumerate(smoothed):
        f = float(sm.pdf(np.array([ts[i]]))[0])
        F = float(sm.cdf(np.array([ts[i]]))[0])
        if f <= 0:
            raise ValidationError(f"zero density at t={ts[i]}")
        out[i] = (F / f) * (inv.sum() / (n - 1) - inv[i])
    return out


@dataclass(frozen=True)
class ShootResult:
    stop: float          # bid at loop exit
    status: int          # kernels.STATUS_*
    bbar: float
    step: float
    t_path: np.ndarray   # one row of inverse-bid values per step

    @property
    def b_path(self) -> np.ndarray:
        return self.bbar - self.step * np.arange(len(self.t_path))

    def skipped_value_events(self, smoothed: list[SmoothedDistribution]) -> int:
        """Steps where a curve jumped clear over a value's whole triangle.

        The step size was too large to resolve that value's density spike;
        a nonzero count means the walk's output cannot be trusted there.
        """
        count = 0
        for i, sm in enumerate(smoothed):
            path = self.t_path[:, i]
            before, after = path[:-1], path[1:]
            for v in sm.source.values:
                lo, hi = v - sm.w, v + sm.w
                count += int(np.sum((before > hi) & (after < lo)))
                count += int(np.sum((before < lo) & (after > hi)))
        return count


def _flat_tables(smoothed: list[SmoothedDistribution]):
    ioff = [0]
    boff = [0]
    breaks, dens_a, dens_c, cdf_left = [], [], [], []
    for sm in smoothed:
        breaks.extend(sm.breaks)
        dens_a.extend(sm.dens_a)
        dens_c.extend(sm.dens_c)
        cdf_left.extend(sm.cdf_left[:-1])
        ioff.append(len(dens_a))
        boff.append(len(breaks))
    return (
        np.asarray(ioff, dtype=np.int64),
        np.asarray(boff, dtype=np.int64),
        np.asarray(breaks, dtype=float),
        np.asarray(dens_a, dtype=float),
        np.asarray(dens_c, dtype=float),
        np.asarray(cdf_left, dtype=float),
    )


def backward_shoot(smoothed: list[SmoothedDistribution], bbar: float,
                   step: float = DEFAULT_STEP, clamp: float | None = None,
                   init: str = "top", floor_extension: bool = True) -> ShootResult:
    """Fixed-step Euler walk of the inverse-bid system from the guess down.

    Runs while all inverse-bid curves stay above the bid; the full trajectory is recorded for oscillation
    diagnostics.  ``init`` starts every curve at the common support top
    ('top', the default) or at each buyer's own largest value ('peak').  With ``floor_extension`` the walk evaluates the density
    outside a buyer's padded support as the mix floor instead of zero, which
    is the only reading under which the common-top start is executable.
    ``clamp`` caps |dt/db| when set (off by default: the raw failure modes
    are the point).
    """
    if step <= 0:
        raise ValidationError("step must be positive")
    n = len(smoothed)
    if init == "top":
        t0 = np.full(n, max(float(sm.breaks[-1]) for sm in smoothed))
    elif init == "peak":
        t0 = np.array([float(sm.source.values[-1]) for sm in smoothed])
    else:
        raise ValidationError(f"unknown init mode {init!r}")
    max_steps = int(math.ceil((bbar + 0.5) / step)) + 8
    traj = np.empty((max_steps + 1, n))
    tables = _flat_tables(smoothed)
    floor_ext = (
        np.array([sm.eps_mix * sm.floor for sm in smoothed])
        if floor_extension
        else np.zeros(n)
    )
    if clamp is None:
        stop, rows, status = kernels.euler_shoot(
            t0, bbar, step, *tables, floor_ext, max_steps, traj,
        )
    else:
        stop, rows, status = _shoot_clamped(
            t0, bbar, step, tables, floor_ext, max_steps, traj, clamp
        )
    return ShootResult(stop, status, bbar, step, traj[:rows].copy())


def _shoot_clamped(t0, bbar, step, tables, floor_ext, max_steps, traj, clamp):
    from . import _kernels_py as ref

    n = len(t0)
    t = t0.copy()
    b = bbar
    traj[0] = t
    rows = 1
    for _ in range(max_steps):
        if np.any(t <= b):
            return b, rows, kernels.STATUS_OK
        inv = 1.0 / np.maximum(t - b, 1e-14)
        deriv = np.empty(n)
        for i in range(n):
            f, F = ref._pdf_cdf(t[i], i, *tables, floor_ext)
            if f <= 0.0 or not math.isfinite(f):
                return b, rows, kernels.STATUS_NONFINITE
            deriv[i] = (F / f) * (inv.sum() / (n - 1) - inv[i])
        if not np.all(np.isfinite(deriv)):
            return b, rows, kernels.STATUS_NONFINITE
        deriv = np.clip(deriv, -clamp, clamp)
        t = t - deriv * step
        b -= step
        traj[rows] = t
        rows += 1
    return b, rows, kernels.STATUS_STEP_CAP


@dataclass(frozen=True)
class ContinuousReport:
    converged: bool
    iterations: int
    b_bar: float            # final guess, original price scale
    b_min_computed: float   # best stop at/above the true bottom, original scale
    residual: float         # best |stop - true smallest winning bid| seen
    wall_ms: float
    best_shoot: ShootResult | None = None   # walk behind b_min_computed
    scale: float = 1.0


def solve_continuous(instance: AuctionInstance, tol: float = 0.01,
                     w: float = DEFAULT_W, eps_mix: float = DEFAULT_EPS_MIX,
                     step: float = DEFAULT_STEP, clamp: float | None = None,
                     init: str = "top", floor_extension: bool = True,
                     max_iter: int = 60,
                     deadline: float | None = None) -> ContinuousReport:
    """Binary search over the guess, with the Euler walk as the inner loop.

    Succeeds when a walk's exit bid lands within ``tol`` of the true
    smallest winning bid (computed exactly from the discrete instance).
    Gives up when the bracket shrinks below the Euler step, the resolution
    floor of the inner loop.  ``b_min_computed`` reports the lowest exit bid
    the walks achieved without undershooting the true bottom: when the
    search fails, that is how close this method could get, and its walk is
    kept for trajectory diagnostics.
    """
    t_start = time.perf_counter()
    scaled, L = rescale_unit(instance)
    gaps = [
        float(np.min(np.diff(b.values))) for b in scaled.buyers if b.size > 1
    ]
    if gaps:  # keep triangles disjoint on instances with tight value grids
        w = min(w, 0.49 * min(gaps))
    smoothed = smooth(scaled, w, eps_mix)
    b_min = smallest_winning_bid(instance) / L
    ub, lb = 1.0, 0.0
    best_res = math.inf
    floor_stop = math.inf
    floor_shoot = None
    it = 0
    for it in range(1, max_iter + 1):
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutExceeded("continuous solve exceeded its deadline")
        bbar = 0.5 * (ub + lb)
        res = backward_shoot(smoothed, bbar, step, clamp=clamp, init=init,
                             floor_extension=floor_extension)
        stop = res.stop
        if stop > b_min:
            ub = bbar
            if stop < floor_stop:
                floor_stop = stop
                floor_shoot = res
        else:
            lb = bbar
        best_res = min(best_res, abs(stop - b_min))
        if abs(stop - b_min) * L < tol:
            return ContinuousReport(True, it, bbar * L, stop * L,
                                    abs(stop - b_min) * L,
                                    (time.perf_counter() - t_start) * 1e3,
                                    res, L)
        if ub - lb < step:
            break
    if floor_shoot is None:
        floor_stop = 0.0
    return ContinuousReport(False, it, (0.5 * (ub + lb)) * L, floor_stop * L,
                            best_res * L,
                            (time.perf_counter() - t_start) * 1e3,
                            floor_shoot, L)
