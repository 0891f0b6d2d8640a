"""Inner preconditioners and the two face-restricted application strategies.

Inner kinds work on a principal submatrix ``A[subset, subset]``:

* ``cholesky`` - exact solve (dense factor for small sets, sparse LU otherwise)
* ``ic0``      - incomplete Cholesky with zero fill on the submatrix pattern
* ``ssor``     - one symmetric Gauss-Seidel/SOR sweep

``FaceStrategy`` turns an inner kind into the free-gradient preconditioner
the solvers call: ``face`` rebuilds on every free-set change, ``approx``
builds once on all indices and zeroes the active components afterwards.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import _kernels
from .constraints import ActiveFreeSplit, zero_on_active
from .errors import (
    BreakdownNonpositivePivot,
    NotPositiveDefinite,
    StaleFactorization,
    ZeroDiagonal,
)
from .linalg import SparseSymMatrix, cholesky_solve, dense_cholesky

INNER_KINDS = ("cholesky", "ic0", "ssor")
FACE_MODES = ("none", "face", "approx")

# exact solves switch from the dense factor to sparse LU above this size
DENSE_EXACT_LIMIT = 400


@dataclass(frozen=True, eq=False)
class InnerPreconditioner:
    """An inner preconditioner factored on ``subset``; ``apply`` acts on subset-length vectors."""

    kind: str
    subset: np.ndarray
    build_count: int
    _solve: object = field(repr=False)
    setup_time: float = 0.0

    @property
    def size(self) -> int:
        return int(self.subset.size)

    def apply(self, r) -> np.ndarray:
        r = np.ascontiguousarray(r, dtype=np.float64)
        if r.shape != (self.size,):
            raise ValueError(f"vector of shape {r.shape} for preconditioner on {self.size} indices")
        return self._solve(r)


def _exact_solver(sub: SparseSymMatrix):
    if sub.n <= DENSE_EXACT_LIMIT:
        factor = dense_cholesky(sub.toarray())
        return lambda r: cholesky_solve(factor, r)
    # symmetric-mode LU without pivoting: U's diagonal holds the LDL^T pivots
    lu = spla.splu(sub.to_scipy().tocsc(), permc_spec="MMD_AT_PLUS_A",
                   diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    pivots = lu.U.diagonal()
    if not np.all(pivots > 0.0) or not np.array_equal(lu.perm_r, lu.perm_c):
        bad = int(np.flatnonzero(~(pivots > 0.0))[0]) if np.any(~(pivots > 0.0)) else -1
        raise NotPositiveDefinite("submatrix is not positive definite", pivot=bad)
    return lu.solve


def _triangular_solver(indptr, indices, data, scale=1.0):
    def solve(r):
        y = _kernels.lower_solve(indptr, indices, data, r)
        z = _kernels.lower_transpose_solve(indptr, indices, data, y)
        return z * scale if scale != 1.0 else z
    return solve


def _ic0_solver(sub: SparseSymMatrix, shift: bool):
    indptr, indices, data = sub.lower_with_diagonal()
    diag_pos = indptr[1:] - 1
    gamma = 1e-3
    attempts = 4 if shift else 1
    for attempt in range(attempts):
        trial = data.copy()
        if attempt:
            trial[diag_pos] *= 1.0 + gamma
            gamma *= 2.0
        L, status = _kernels.ic0_factor(indptr, indices, trial)
        if status < 0:
            return _triangular_solver(indptr, indices, L)
    raise BreakdownNonpositivePivot(f"IC(0) non-positive pivot at row {status}", pivot=int(status))


def _ssor_solver(sub: SparseSymMatrix, omega: float):
    if not 0.0 < omega < 2.0:
        raise ValueError("SSOR relaxation must lie in (0, 2)")
    indptr, indices, data = sub.lower_with_diagonal()
    diag = data[indptr[1:] - 1].copy()
    if np.any(diag == 0.0):
        raise ZeroDiagonal(f"zero diagonal at row {int(np.flatnonzero(diag == 0.0)[0])}")
    if np.any(diag < 0.0):
        raise NotPositiveDefinite("SSOR needs a positive diagonal")
    # M = (D + wL) D^-1 (D + wL)^T / (w (2 - w)) = K K^T / (w (2 - w)),  K = (D + wL) D^-1/2
    K = data * omega
    K[indptr[1:] - 1] = diag
    K = K / np.sqrt(diag)[indices]
    return _triangular_solver(indptr, indices, K, scale=omega * (2.0 - omega))


def build_inner(A: SparseSymMatrix, subset, kind: str, *, omega: float = 1.0,
                ic0_shift: bool = False, build_count: int = 1) -> InnerPreconditioner:
    """Factor the inner preconditioner of ``kind`` on ``A[subset, subset]``."""
    if kind not in INNER_KINDS:
        raise ValueError(f"unknown inner preconditioner {kind!r}")
    subset = np.array(subset, dtype=np.int64).ravel()
    if subset.size == 0:
        raise ValueError("cannot build a preconditioner on an empty index set")
    subset.setflags(write=False)
    t0 = time.perf_counter()
    sub = A if subset.size == A.n and np.array_equal(subset, np.arange(A.n)) else A.principal(subset)
    if kind == "cholesky":
        solve = _exact_solver(sub)
    elif kind == "ic0":
        solve = _ic0_solver(sub, ic0_shift)
    else:
        solve = _ssor_solver(sub, omega)
    return InnerPreconditioner(kind, subset, build_count, solve, time.perf_counter() - t0)


def face_apply(h: InnerPreconditioner, gf, s: ActiveFreeSplit) -> np.ndarray:
    """Preconditioned free gradient: inner solve on the free block, zero elsewhere."""
    if not np.array_equal(h.subset, s.free):
        raise StaleFactorization("preconditioner was built on a different free set")
    z = np.zeros(s.n)
    z[s.free] = h.apply(np.asarray(gf, dtype=float)[s.free])
    return z


def approx_face_apply(h: InnerPreconditioner, gf, s: ActiveFreeSplit) -> np.ndarray:
    """Full inner apply followed by zeroing the active components."""
    z = h.apply(np.asarray(gf, dtype=float))
    if s.free.size == s.n:
        return z
    return zero_on_active(z, s)


def superset_face_apply(h: InnerPreconditioner, gf, s: ActiveFreeSplit) -> np.ndarray:
    """Face apply with a factor fixed on a set assumed never active.

    Free indices outside that set pass through unpreconditioned.
    """
    gf = np.asarray(gf, dtype=float)
    z = zero_on_active(gf, s)
    z[h.subset] = h.apply(gf[h.subset])
    return zero_on_active(z, s)


def ensure_face_current(h: InnerPreconditioner | None, s: ActiveFreeSplit, A: SparseSymMatrix,
                        kind: str, *, fixed_free=None, **build_opts) -> InnerPreconditioner:
    """Return ``h`` if it matches the target set, otherwise a rebuilt handle."""
    target = s.free if fixed_free is None else np.asarray(fixed_free, dtype=np.int64)
    if h is not None and np.array_equal(h.subset, target):
        return h
    count = 1 if h is None else h.build_count + 1
    return build_inner(A, target, kind, build_count=count, **build_opts)


class FaceStrategy:
    """Stateful preconditioner the solver applies to every new free gradient.

    Tracks rebuilds, applications and the time spent in factorizations.
    """

    def __init__(self, A: SparseSymMatrix, mode: str, kind: str, *, fixed_free=None,
                 omega: float = 1.0, ic0_shift: bool = False):
        if mode not in ("face", "approx"):
            raise ValueError(f"FaceStrategy mode must be 'face' or 'approx', got {mode!r}")
        if fixed_free is not None:
            fixed_free = np.unique(np.asarray(fixed_free, dtype=np.int64))
            if fixed_free.size and (fixed_free[0] < 0 or fixed_free[-1] >= A.n):
                raise IndexError("fixed free set index out of range")
        self.A = A
        self.mode = mode
        self.kind = kind
        self.fixed_free = fixed_free
        self.build_opts = {"omega": omega, "ic0_shift": ic0_shift}
        self.handle: InnerPreconditioner | None = None
        self.applies = 0
        self.setup_time = 0.0
        self.build_sets: list[np.ndarray] = []

    @property
    def rebuilds(self) -> int:
        return 0 if self.handle is None else self.handle.build_count

    def _refresh(self, s: ActiveFreeSplit):
        old = self.handle
        self.handle = ensure_face_current(old, s, self.A, self.kind,
                                          fixed_free=self.fixed_free, **self.build_opts)
        if self.handle is not old:
            self.setup_time += self.handle.setup_time
            self.build_sets.append(self.handle.subset)

    def __call__(self, gf, s: ActiveFreeSplit) -> np.ndarray:
        self.applies += 1
        if self.mode == "approx":
            if self.handle is None:
                self.handle = build_inner(self.A, np.arange(self.A.n), self.kind, **self.build_opts)
                self.setup_time += self.handle.setup_time
                self.build_sets.append(self.handle.subset)
            return approx_face_apply(self.handle, gf, s)
        if self.fixed_free is not None:
            if self.fixed_free.size == 0:
                return zero_on_active(gf, s)
            self._refresh(s)
            return superset_face_apply(self.handle, gf, s)
        if s.free.size == 0:
            return np.zeros(s.n)
        self._refresh(s)
        return face_apply(self.handle, gf, s)
