"""Hot-kernel dispatch.

``conv2d_forward``, ``conv2d_backward`` and ``polygon_mask_kernel`` are
bound at import time to the numba or numpy implementation, as selected
by :mod:`annoseg.backend`.  Both implementation modules stay importable
directly (``kernels.get_impl("numpy")``) so tests and the benchmark can
compare them.
"""

from .. import backend
from . import _numpy

if backend.USING_NUMBA:
    from . import _numba as _active
else:
    _active = _numpy

conv2d_forward = _active.conv2d_forward
conv2d_backward = _active.conv2d_backward
polygon_mask_kernel = _active.polygon_mask_kernel


def get_impl(name):
    """Return the named implementation module ("numpy" or "numba")."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")
