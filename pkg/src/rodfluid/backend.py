"""Kernel backend selection.

Hot loops are written once as plain Python over numpy arrays and compiled
with numba when available.  Setting the environment variable
``RODFLUID_NUMBA=0`` (or ``false``/``off``) before import selects the
interpreted numpy path instead; both paths consume the same random stream
and produce identical results.
"""

import functools
import os

import numpy as np

_FALSY = {"0", "false", "off", "no"}


def _numba_requested() -> bool:
    return os.environ.get("RODFLUID_NUMBA", "1").strip().lower() not in _FALSY


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False


def kernel(fn):
    """Decorator for hot-loop functions: numba-compiled or left as-is.

    The interpreted path runs under ``np.errstate(over="ignore")`` because
    the RNG relies on wrapping uint64 arithmetic.
    """
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)

    @functools.wraps(fn)
    def wrapper(*args):
        with np.errstate(over="ignore"):
            return fn(*args)

    return wrapper


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
