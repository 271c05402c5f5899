"""JIT toggle for the hot loops.

Kernels are written once in a numba-compatible subset of Python. When
numba is importable and ``FLATLINE_DISABLE_JIT`` is unset (or "0"), they
are compiled with ``numba.njit``; otherwise the same bodies run as plain
Python over numpy arrays.
"""

import os

_FLAG = os.environ.get("FLATLINE_DISABLE_JIT", "0").strip().lower()
JIT_REQUESTED = _FLAG in ("", "0", "false", "no", "off")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

JIT_ENABLED = JIT_REQUESTED and _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def backend():
    """Name of the active kernel backend."""
    return "numba" if JIT_ENABLED else "python"


def thread_cap():
    """Parallelism cap from ``FLATLINE_THREADS`` (at least 1)."""
    raw = os.environ.get("FLATLINE_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)
