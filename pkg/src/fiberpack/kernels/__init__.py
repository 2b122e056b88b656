"""Kernel backend selection.

The hot numeric loops exist twice: a numba @njit implementation and a pure
numpy fallback with identical contracts.  Selection happens once at import:

    FIBERPACK_KERNELS=numba   require numba (ImportError if missing)
    FIBERPACK_KERNELS=numpy   force the pure-numpy path
    unset / auto              numba when importable, else numpy

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

_choice = os.environ.get("FIBERPACK_KERNELS", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"FIBERPACK_KERNELS must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _numpy as _impl
elif _choice == "numba":
    from . import _numba as _impl
else:
    try:
        from . import _numba as _impl
    except ImportError:
        from . import _numpy as _impl

BACKEND = _impl.BACKEND

build_cell_csr = _impl.build_cell_csr
total_forces = _impl.total_forces
pairs_within = _impl.pairs_within
PlacementIndex = _impl.PlacementIndex
segment_pair_counts = _impl.segment_pair_counts
rasterize_balls = _impl.rasterize_balls


def get_backend(name: str):
    """Fetch a specific backend module (for equivalence tests and benchmarks)."""
    if name == "numpy":
        from . import _numpy
        return _numpy
    if name == "numba":
        from . import _numba
        return _numba
    raise ValueError(name)
