"""Optional numba acceleration.

Set ``VIADEL_JIT=0`` in the environment (before import) to run every kernel
as plain Python/numpy. The two paths execute the same source.
"""
import os

_flag = os.environ.get("VIADEL_JIT", "1").strip().lower()
JIT_REQUESTED = _flag not in ("0", "false", "no", "off")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

JIT_ENABLED = JIT_REQUESTED and HAS_NUMBA


def njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if JIT_ENABLED:
        return numba.njit(cache=True)(func)
    return func
