"""JIT switch for the numeric kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``GREENCELL_NO_JIT`` is unset (or ``0``). Setting it to ``1`` selects
the pure-numpy fallbacks in :mod:`greencell.kernels`, which must produce the
same results.
"""
from __future__ import annotations

import os

_flag = os.environ.get("GREENCELL_NO_JIT", "0").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA: bool = numba is not None and _flag in ("", "0", "false", "no")


def njit(fn):
    """Compile ``fn`` in nopython mode, or return it untouched when JIT is off."""
    if not USE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def thread_cap() -> int | None:
    """Thread limit from ``GREENCELL_THREADS``, or None when unset."""
    raw = os.environ.get("GREENCELL_THREADS")
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError("GREENCELL_THREADS must be >= 1")
    return n


def _cap_native_threads() -> None:
    # BLAS/OpenMP read these once, when first loaded, so this runs at import
    n = thread_cap()
    if n is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


_cap_native_threads()


def apply_thread_cap() -> None:
    """Limit numba's pool to ``GREENCELL_THREADS``. BLAS limits take effect
    only when this package is imported before numpy."""
    n = thread_cap()
    if n is not None and USE_NUMBA:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
