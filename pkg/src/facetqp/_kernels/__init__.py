"""Kernel backend selection.

``FACETQP_KERNELS=numpy`` forces the pure-numpy path; the default is the
numba path, falling back to numpy when numba cannot be imported. The choice is
made once at import time.
"""

import os

from . import _numpy

BACKEND = os.environ.get("FACETQP_KERNELS", "numba").strip().lower()

if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"FACETQP_KERNELS must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        from . import _numba as _impl
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"
        _impl = _numpy
else:
    _impl = _numpy

csr_matvec = _impl.csr_matvec
ic0_factor = _impl.ic0_factor
lower_solve = _impl.lower_solve
lower_transpose_solve = _impl.lower_transpose_solve
dense_cholesky = _impl.dense_cholesky
jacobi_eigenvalues = _impl.jacobi_eigenvalues

__all__ = [
    "BACKEND",
    "csr_matvec",
    "ic0_factor",
    "lower_solve",
    "lower_transpose_solve",
    "dense_cholesky",
    "jacobi_eigenvalues",
]
