"""Kernel backend selection.

The hot numeric kernels (2-d convolution passes, polygon rasterization)
exist twice: a numba @njit implementation and a pure-numpy one.  By
default the numba path is used when numba imports cleanly; setting the
environment variable ``ANNOSEG_NUMBA`` to ``0``/``false``/``off`` forces
the numpy path.  The choice is made once at import time.
"""

import os

_FALSY = ("0", "false", "off", "no")


def _numba_requested() -> bool:
    return os.environ.get("ANNOSEG_NUMBA", "1").strip().lower() not in _FALSY


NUMBA_REQUESTED = _numba_requested()

HAVE_NUMBA = False
if NUMBA_REQUESTED:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

USING_NUMBA = NUMBA_REQUESTED and HAVE_NUMBA


def using_numba() -> bool:
    """True when the numba kernel path is active for this process."""
    return USING_NUMBA


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"


def set_num_threads(n: int) -> None:
    """Cap worker threads in the numba layer (no-op on the numpy path).

    ``n <= 0`` leaves the backend default untouched.
    """
    if n <= 0:
        return
    if USING_NUMBA:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
