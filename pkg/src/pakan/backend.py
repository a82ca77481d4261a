"""Kernel backend selection.

The fused spline kernels exist twice: a compiled extension (``_kernels``,
built from Cython) and a pure-numpy fallback (``_kernels_np``).  The compiled
module is preferred when importable; ``PAKAN_KERNELS=numpy`` forces the
fallback, ``PAKAN_KERNELS=compiled`` makes a missing extension a hard error.
Both expose the same functions and produce the same values up to summation
order.
"""

import os

from . import _kernels_np

_choice = os.environ.get("PAKAN_KERNELS", "auto")

if _choice == "numpy":
    kernels = _kernels_np
elif _choice == "compiled":
    from . import _kernels as kernels  # type: ignore[no-redef]
elif _choice == "auto":
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_np
else:
    raise RuntimeError(f"PAKAN_KERNELS must be auto|compiled|numpy, got {_choice!r}")


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'numpy'."""
    return "numpy" if kernels is _kernels_np else "compiled"
