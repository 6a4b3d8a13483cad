"""Kernel backend selection.

The numeric kernels in ``_kernels.py`` are written once and either compiled
with numba's ``@njit`` or run as plain numpy, depending on the environment
variable ``COREG_BACKEND``:

    COREG_BACKEND=numba   force numba (raises if numba is not importable)
    COREG_BACKEND=numpy   pure-numpy fallback, no compilation
    unset / "auto"        numba when available, numpy otherwise

The choice is made once at import time.  ``benchmarks/bench_kernels.py``
runs the same workload under both settings in subprocesses.
"""

import os

BACKEND_ENV = "COREG_BACKEND"


def _select() -> str:
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if choice in ("", "auto"):
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
        return "numba"
    if choice not in ("numba", "numpy"):
        raise RuntimeError(
            f"{BACKEND_ENV} must be 'numba', 'numpy' or 'auto', got {choice!r}"
        )
    return choice


ACTIVE_BACKEND = _select()

if ACTIVE_BACKEND == "numba":
    from numba import njit

    def jit_kernel(fn):
        return njit(cache=True)(fn)

else:

    def jit_kernel(fn):
        return fn


def kernel_source(fn):
    """The uncompiled python function behind a kernel (the kernel itself
    on the numpy backend).  Used by tests to cross-check both paths."""
    return getattr(fn, "py_func", fn)
