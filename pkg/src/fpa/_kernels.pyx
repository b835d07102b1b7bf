# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: root solves for the descent engine and the Euler loop
of the continuous baseline.  Semantics match ``_kernels_py`` exactly."""

from libc.math cimport log, pow, isfinite, NAN

cdef double EPS_GAP = 1e-14

BACKEND = "compiled"

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_STEP_CAP = 2


cdef inline double _inv_sum(double x, double[::1] lam) nogil:
    cdef double s = 0.0, d
    cdef Py_ssize_t j
    for j in range(lam.shape[0]):
        d = lam[j] - x
        if d < EPS_GAP:
            d = EPS_GAP
        s += 1.0 / d
    return s


cdef inline double _h(double x, double[::1] lam, double v) nogil:
    cdef double dv = v - x
    if dv < EPS_GAP:
        dv = EPS_GAP
    return _inv_sum(x, lam) / (lam.shape[0] - 1) - 1.0 / dv


cdef inline double _phi(double x, double[::1] lam) nogil:
    return x + (lam.shape[0] - 1) / _inv_sum(x, lam)


cdef inline double _H(double x, double[::1] lam, double v) nogil:
    cdef double s = 0.0, d, dv
    cdef Py_ssize_t j
    for j in range(lam.shape[0]):
        d = lam[j] - x
        if d < EPS_GAP:
            d = EPS_GAP
        s += log(d)
    dv = v - x
    if dv < EPS_GAP:
        dv = EPS_GAP
    return log(dv) - s / (lam.shape[0] - 1)


def h_value(double x, double[::1] lam_values, double v):
    return _h(x, lam_values, v)


def phi_star(double x, double[::1] lam_values):
    return _phi(x, lam_values)


def capital_h(double x, double[::1] lam_values, double v):
    return _H(x, lam_values, v)


def segment_cdf_eval(double x, double v, double hi, double F_hi,
                     double[::1] lam_values):
    cdef double dv_x = v - x
    cdef double dv_hi = v - hi
    cdef double prod = 1.0, num, den
    cdef Py_ssize_t j
    if dv_x < EPS_GAP:
        dv_x = EPS_GAP
    if dv_hi < EPS_GAP:
        dv_hi = EPS_GAP
    for j in range(lam_values.shape[0]):
        num = lam_values[j] - hi
        den = lam_values[j] - x
        if num < EPS_GAP:
            num = EPS_GAP
        if den < EPS_GAP:
            den = EPS_GAP
        prod *= num / den
    return F_hi * (dv_x / dv_hi) * pow(prod, 1.0 / (lam_values.shape[0] - 1))


def solve_enter(double v, double[::1] lam_values, double b, double tol):
    cdef double lo, hi, mid
    if _h(0.0, lam_values, v) < 0.0:
        return NAN
    if _h(b, lam_values, v) >= 0.0:
        return b
    lo = 0.0
    hi = b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _h(mid, lam_values, v) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def solve_leave(double v, double[::1] lam_values, double b, double drop,
                double tol):
    cdef double target = _H(b, lam_values, v) - drop
    cdef double lo, hi, mid
    if _H(0.0, lam_values, v) > target:
        return NAN
    lo = 0.0
    hi = b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _H(mid, lam_values, v) <= target:
            lo = mid
        else:
            hi = mid
    return lo


cdef inline void _pdf_cdf(double t, Py_ssize_t i, long[::1] ioff,
                          long[::1] boff, double[::1] breaks,
                          double[::1] dens_a, double[::1] dens_c,
                          double[::1] cdf_left, double[::1] floor_ext,
                          double* f, double* F) nogil:
    cdef Py_ssize_t blo = boff[i]
    cdef Py_ssize_t bhi = boff[i + 1] - 1
    cdef Py_ssize_t lo, hi, mid, seg
    cdef double a, c, x0
    if t <= breaks[blo]:
        f[0] = floor_ext[i]
        F[0] = 0.0
        return
    if t >= breaks[bhi]:
        f[0] = floor_ext[i]
        F[0] = 1.0
        return
    lo = blo
    hi = bhi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if breaks[mid] <= t:
            lo = mid
        else:
            hi = mid
    seg = ioff[i] + (lo - blo)
    a = dens_a[seg]
    c = dens_c[seg]
    x0 = breaks[lo]
    f[0] = a * t + c
    F[0] = cdf_left[seg] + 0.5 * a * (t * t - x0 * x0) + c * (t - x0)


def euler_shoot(double[::1] t0, double bbar, double step, long[::1] ioff,
                long[::1] boff, double[::1] breaks, double[::1] dens_a,
                double[::1] dens_c, double[::1] cdf_left,
                double[::1] floor_ext, long max_steps,
                double[:, ::1] traj):
    cdef Py_ssize_t n = t0.shape[0]
    cdef Py_ssize_t i, rows
    cdef long k
    cdef double b = bbar
    cdef double inv_sum, d, f, F
    cdef double t[64]
    cdef double deriv[64]
    if n > 64:
        raise ValueError("euler_shoot supports at most 64 buyers")
    for i in range(n):
        t[i] = t0[i]
        traj[0, i] = t[i]
    rows = 1
    for k in range(max_steps):
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
            _pdf_cdf(t[i], i, ioff, boff, breaks, dens_a, dens_c, cdf_left,
                     floor_ext, &f, &F)
            if f <= 0.0:
                return b, rows, STATUS_NONFINITE
            d = t[i] - b
            if d < EPS_GAP:
                d = EPS_GAP
            deriv[i] = (F / f) * (inv_sum / (n - 1) - 1.0 / d)
            if not isfinite(deriv[i]):
                return b, rows, STATUS_NONFINITE
        for i in range(n):
            t[i] = t[i] - deriv[i] * step
        b = b - step
        if rows < traj.shape[0]:
            for i in range(n):
                traj[rows, i] = t[i]
            rows += 1
    return b, rows, STATUS_STEP_CAP
