"""Kernel backend selection.

DEFTAN2_BACKEND=numpy forces the pure-numpy kernels; =numba forces the
compiled ones (ImportError if numba is missing); anything else (or unset)
auto-selects numba when importable. The choice is made once at import.
"""

import os

from . import _kernels_numpy

_requested = os.environ.get("DEFTAN2_BACKEND", "auto").strip().lower()

if _requested == "numpy":
    kernels = _kernels_numpy
    BACKEND = "numpy"
elif _requested == "numba":
    from . import _kernels_numba as kernels

    BACKEND = "numba"
else:
    try:
        from . import _kernels_numba as kernels

        BACKEND = "numba"
    except ImportError:
        kernels = _kernels_numpy
        BACKEND = "numpy"


def backend_name():
    return BACKEND
