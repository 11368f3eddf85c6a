"""Kernel compilation switch.

Hot kernels are written once in a numpy subset that numba can compile.  When
numba is importable and ``GINARCP_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise the very same functions run as plain
numpy code.  The flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("GINARCP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG in ("", "0", "false", "no")


def kernel(fn):
    """Compile ``fn`` with numba when acceleration is enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def python_impl(fn):
    """Return the uncompiled implementation of a kernel."""
    return getattr(fn, "py_func", fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def kernel_or(numpy_impl):
    """Compile the decorated loop implementation, or fall back to ``numpy_impl``.

    Used where the fastest numba formulation (explicit loops) differs from
    the fastest numpy formulation (vectorised array expressions).
    """

    def deco(loop_impl):
        if USE_NUMBA:
            compiled = numba.njit(cache=True, nogil=True)(loop_impl)
            compiled.numpy_impl = numpy_impl
            return compiled
        numpy_impl.loop_impl = loop_impl
        return numpy_impl

    return deco
