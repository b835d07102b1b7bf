"""Kernel backend selection.

The compiled extension is used when it imported cleanly; setting
FPA_PURE_PYTHON=1 forces the pure-Python fallback.  Both expose the same
functions with identical semantics, so everything above this module is
backend-agnostic.
"""

import os

if os.environ.get("FPA_PURE_PYTHON", "") in ("1", "true", "yes"):
    from . import _kernels_py as impl
else:
    try:
        from . import _kernels as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as impl

BACKEND = impl.BACKEND

h_value = impl.h_value
phi_star = impl.phi_star
capital_h = impl.capital_h
segment_cdf_eval = impl.segment_cdf_eval
solve_enter = impl.solve_enter
solve_leave = impl.solve_leave
euler_shoot = impl.euler_shoot
STATUS_OK = impl.STATUS_OK
STATUS_NONFINITE = impl.STATUS_NONFINITE
STATUS_STEP_CAP = impl.STATUS_STEP_CAP
