"""Sparse symmetric storage and the dense/sparse kernels the solvers need."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _kernels
from .errors import (
    DenseCapExceeded,
    DimensionMismatch,
    EigenNotConverged,
    NotPositiveDefinite,
    NotSymmetric,
)

DEFAULT_DENSE_CAP = 4000


def dense_cap() -> int:
    """Largest dimension allowed on the dense paths (``FACETQP_DENSE_CAP`` overrides)."""
    value = os.environ.get("FACETQP_DENSE_CAP")
    return int(value) if value else DEFAULT_DENSE_CAP


def check_dense_cap(n: int, what: str = "dense path") -> None:
    cap = dense_cap()
    if n > cap:
        raise DenseCapExceeded(
            f"{what} needs a {n}x{n} dense matrix but the cap is {cap}; "
            "use a smaller problem or raise FACETQP_DENSE_CAP"
        )


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Symmetric matrix in CSR layout holding both triangles.

    Column indices are strictly increasing inside each row. Construction
    validates the pattern and exact value symmetry unless ``check=False``.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    check: bool = field(default=True, repr=False)
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        for arr in (indptr, indices, data):
            arr.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)
        if indptr.shape != (self.n + 1,) or indices.shape != data.shape:
            raise DimensionMismatch("inconsistent CSR array shapes")
        csr = sp.csr_matrix((data, indices, indptr), shape=(self.n, self.n))
        object.__setattr__(self, "_csr", csr)
        if self.check:
            self._validate()

    def _validate(self):
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.n:
                raise DimensionMismatch("column index out of range")
            steps = np.diff(self.indices)
            row_starts = self.indptr[1:-1]
            boundary = np.zeros(steps.size, dtype=bool)
            boundary[row_starts[(row_starts > 0) & (row_starts <= steps.size)] - 1] = True
            if np.any((steps <= 0) & ~boundary):
                raise ValueError("column indices must be strictly increasing within rows")
        t = self._csr.T.tocsr()
        t.sort_indices()
        if not (
            np.array_equal(t.indptr, self.indptr)
            and np.array_equal(t.indices, self.indices)
            and np.array_equal(t.data, self.data)
        ):
            raise NotSymmetric("matrix pattern or values are not exactly symmetric")

    @classmethod
    def from_scipy(cls, m, check: bool = True) -> "SparseSymMatrix":
        csr = sp.csr_matrix(m, dtype=np.float64, copy=True)
        if csr.shape[0] != csr.shape[1]:
            raise DimensionMismatch(f"matrix is not square: {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data, check=check)

    @classmethod
    def from_dense(cls, m, check: bool = True) -> "SparseSymMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(m, dtype=float)), check=check)

    @classmethod
    def identity(cls, n: int) -> "SparseSymMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"))

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    @property
    def shape(self):
        return (self.n, self.n)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def principal(self, subset) -> "SparseSymMatrix":
        """Principal submatrix ``A[subset, subset]`` (subset sorted)."""
        idx = _as_index(subset, self.n)
        sub = self._csr[idx][:, idx]
        return SparseSymMatrix.from_scipy(sub, check=False)

    def lower_with_diagonal(self):
        """Lower triangle as CSR arrays, each row ending with its diagonal.

        Missing diagonal entries are stored as explicit zeros so the
        triangular kernels can report them instead of indexing past the row.
        """
        low = sp.tril(self._csr, format="csr")
        low.sort_indices()
        counts = np.diff(low.indptr)
        if np.any(counts == 0) or np.any(low.indices[low.indptr[1:] - 1] != np.arange(self.n)):
            low = _with_explicit_diagonal(low, self._csr.diagonal())
        return (np.ascontiguousarray(low.indptr, dtype=np.int64),
                np.ascontiguousarray(low.indices, dtype=np.int64),
                np.ascontiguousarray(low.data, dtype=np.float64))


def _with_explicit_diagonal(low, diag):
    n = low.shape[0]
    indptr = [0]
    indices = []
    data = []
    for i in range(n):
        s, e = low.indptr[i], low.indptr[i + 1]
        cols = low.indices[s:e]
        vals = low.data[s:e]
        keep = cols < i
        indices.extend(cols[keep])
        data.extend(vals[keep])
        indices.append(i)
        data.append(diag[i])
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data), np.array(indices), np.array(indptr)), shape=(n, n))


def _as_index(idx, n) -> np.ndarray:
    arr = np.asarray(idx, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise IndexError(f"index out of range for dimension {n}")
    return arr


def spmv(A: SparseSymMatrix, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise DimensionMismatch(f"vector of shape {x.shape} for matrix of dimension {A.n}")
    return _kernels.csr_matvec(A.indptr, A.indices, A.data, x)


def extract_block(A: SparseSymMatrix, rows, cols) -> np.ndarray:
    r = _as_index(rows, A.n)
    c = _as_index(cols, A.n)
    if r.size == 0 or c.size == 0:
        return np.zeros((r.size, c.size))
    return A._csr[r][:, c].toarray()


@dataclass(frozen=True)
class CholeskyFactor:
    """Dense lower-triangular factor ``L`` with ``L @ L.T`` equal to the factored matrix."""

    L: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]


def dense_cholesky(M) -> CholeskyFactor:
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    L, status = _kernels.dense_cholesky(M)
    if status >= 0:
        raise NotPositiveDefinite(f"non-positive pivot at row {status}", pivot=int(status))
    return CholeskyFactor(L)


def cholesky_solve(F: CholeskyFactor, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape[0] != F.n:
        raise DimensionMismatch(f"right-hand side of length {r.shape[0]} for factor of size {F.n}")
    y = scipy.linalg.solve_triangular(F.L, r, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(F.L.T, y, lower=False, check_finite=False)


def sym_eigenvalues(M, rel_tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.array_equal(M, M.T):
        raise NotSymmetric("sym_eigenvalues needs an exactly symmetric matrix")
    if M.shape[0] == 0:
        return np.zeros(0)
    values, sweeps = _kernels.jacobi_eigenvalues(M, rel_tol, max_sweeps)
    if sweeps < 0:
        raise EigenNotConverged(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.sort(values)


def norm_estimate(A: SparseSymMatrix, rtol: float = 1e-6, max_iter: int = 200) -> float:
    """Power-iteration Rayleigh quotient; never exceeds the spectral norm of an SPS matrix."""
    if not np.any(A.data):
        raise ValueError("norm_estimate of a zero matrix")
    x = np.full(A.n, 1.0 / np.sqrt(A.n))
    lam = None
    for _ in range(max_iter):
        y = spmv(A, x)
        new = float(x @ y)
        ny = np.linalg.norm(y)
        converged = lam is not None and abs(new - lam) <= rtol * abs(new)
        lam = new
        if converged or ny == 0.0:
            break
        x = y / ny
    return lam


def numeric_rank(M, tol: float | None = None) -> int:
    """Count eigenvalues of the Gram matrix above ``tol * lambda_max``.

    The Gram matrix is formed on the smaller side, which has the same nonzero
    spectrum as ``M.T @ M``.
    """
    M = np.asarray(M, dtype=np.float64)
    rows, cols = M.shape
    if rows == 0 or cols == 0:
        return 0
    if tol is None:
        tol = max(rows, cols) * np.finfo(float).eps
    if tol < 0:
        raise ValueError("tol must be non-negative")
    gram = M @ M.T if rows <= cols else M.T @ M
    gram = 0.5 * (gram + gram.T)
    lam = sym_eigenvalues(gram)
    top = lam[-1]
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(lam > tol * top))
