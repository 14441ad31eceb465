"""Numba on/off switch.

Hot kernels in :mod:`latwalk.kernels` are compiled with ``numba.njit`` by
default.  Setting the environment variable ``LATWALK_NUMBA=0`` before import
selects the pure-numpy fallback: the same functions run un-jitted.  The two
paths compute the same quantities; ``benchmarks/bench_kernels.py`` compares
their speed.
"""

import os

_flag = os.environ.get("LATWALK_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "no", "off")

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def maybe_njit(*args, **kwargs):
        return _njit(*args, **kwargs)

else:

    def maybe_njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def py_func_of(fn):
    """Return the uncompiled version of a possibly-jitted kernel."""
    return getattr(fn, "py_func", fn)
