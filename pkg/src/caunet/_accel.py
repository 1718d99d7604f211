"""Numba acceleration toggle.

Set CAUNET_DISABLE_NUMBA=1 to force the pure-numpy fallback path for all
kernels in :mod:`caunet.kernels`. The two paths perform identical arithmetic
(no fastmath), so results match bit for bit.
"""

import os

_FLAG = os.environ.get("CAUNET_DISABLE_NUMBA", "0").strip().lower()
NUMBA_ENABLED = _FLAG not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

def maybe_njit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn
