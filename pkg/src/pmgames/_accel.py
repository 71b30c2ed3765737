"""Optional numba acceleration.

Kernels are written once as plain Python loops over numpy arrays and
compiled with ``numba.njit`` when numba imports and ``PM_GAMES_NO_JIT`` is
unset (or ``0``). With the flag set the same functions run uncompiled,
which is slow but needs nothing beyond numpy.
"""

import os

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

JIT_ENABLED = NUMBA_AVAILABLE and os.environ.get("PM_GAMES_NO_JIT", "0").lower() in ("", "0", "false", "no")


def optional_njit(*args, **kwargs):
    def decorator(func):
        if JIT_ENABLED:
            return _njit(*args, **kwargs)(func)
        return func

    return decorator


def python_impl(func):
    """The uncompiled Python body of a kernel, whichever mode is active."""
    return getattr(func, "py_func", func)
