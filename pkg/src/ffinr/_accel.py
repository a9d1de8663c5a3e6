"""Numba dispatch.

Hot loops in :mod:`ffinr.kernels` are compiled with numba when it is importable.
Setting ``FFINR_DISABLE_NUMBA=1`` forces the vectorised numpy fallbacks instead;
the flag is read once at import time.
"""
import os

_FLAG = "FFINR_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if _disabled_by_env():
        raise ImportError(f"{_FLAG} set")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
