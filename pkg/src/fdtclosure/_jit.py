"""Backend selection for the hot kernels.

Set ``FDTCLOSURE_PURE_NUMPY=1`` to bypass numba and run the vectorized
numpy fallbacks instead. The flag is read once, at import time.
"""
import os

_FLAG = os.environ.get("FDTCLOSURE_PURE_NUMPY", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

USE_NUMBA = _numba is not None and _FLAG not in ("1", "true", "yes", "on")
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba (cached, nopython); identity without numba."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, error_model="numpy")(func)
