"""Pick the compiled kernels when available, the numpy ones otherwise."""
import os

from . import _pykernels

if os.environ.get("IIDCAST_PURE_PYTHON"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _pykernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
