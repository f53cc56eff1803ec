"""Backend selection for the compiled kernels.

Set ``BAIYIN_DISABLE_NUMBA=1`` to force the pure-numpy paths. When numba is
not importable the numpy paths are used automatically.
"""

import os

_FLAG = "BAIYIN_DISABLE_NUMBA"


def _numba_requested():
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


def jit(func):
    """``numba.njit(cache=True)`` when numba is present, identity otherwise.

    The decorated function always exists so tests can compare both paths even
    when the numpy backend is the active one.
    """
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
