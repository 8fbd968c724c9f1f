"""Numba switch.

Kernels are compiled with numba when it is importable and ``CAPP_EMU_JIT``
is not set to a false value (``0``, ``false``, ``no``, ``off``). Otherwise
the pure-numpy kernels are used.
"""

import logging
import os

logger = logging.getLogger(__name__)

_FALSE = {"0", "false", "no", "off"}

JIT_REQUESTED = os.environ.get("CAPP_EMU_JIT", "1").strip().lower() not in _FALSE

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False
    logger.warning("numba not importable, falling back to numpy kernels")

JIT_ENABLED = JIT_REQUESTED and HAVE_NUMBA


def njit(func):
    """``numba.njit(cache=True)`` when numba is present, identity otherwise."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
