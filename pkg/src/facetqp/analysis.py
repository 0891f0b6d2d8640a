"""Spectral diagnostics of approximate preconditioning in face.

With the exact inverse of the full matrix as inner preconditioner, applying
it and zeroing the active components is the same as preconditioning the free
block with the Schur complement ``S = M_FF - M_FA M_AA^-1 M_AF``. The
preconditioned operator ``S^-1 A_FF`` then has at least ``n_F - rank(A_AF)``
unit eigenvalues. Everything here is dense and capped by ``dense_cap()``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .constraints import ActiveFreeSplit
from .errors import NotPositiveDefinite
from .linalg import (
    SparseSymMatrix,
    check_dense_cap,
    dense_cholesky,
    extract_block,
    numeric_rank,
    sym_eigenvalues,
)

TRACE_COLUMNS = ("iteration", "free_size", "offdiag_rank", "cond_precond", "cond_unprecond")


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    rank: int
    n_free: int
    n_active: int
    condition: float
    rank_tol: float

    @property
    def unit_eigenvalue_bound(self) -> int:
        """Guaranteed number of eigenvalues equal to one."""
        return self.n_free - self.rank


def _solve_spd(M, R):
    F = dense_cholesky(M)
    y = scipy.linalg.solve_triangular(F.L, R, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(F.L.T, y, lower=False, check_finite=False)


def schur_complement(M: SparseSymMatrix, s: ActiveFreeSplit) -> np.ndarray:
    """``M_FF - M_FA M_AA^-1 M_AF`` in free-index order."""
    free, active = s.free, s.active
    check_dense_cap(max(free.size, active.size), "schur_complement")
    M_FF = extract_block(M, free, free)
    if active.size == 0 or free.size == 0:
        return M_FF
    M_AA = extract_block(M, active, active)
    M_AF = extract_block(M, active, free)
    try:
        X = _solve_spd(M_AA, M_AF)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite("active block of the matrix is singular or indefinite",
                                  pivot=exc.pivot) from exc
    S = M_FF - M_AF.T @ X
    return 0.5 * (S + S.T)


def approximation_error_term(M: SparseSymMatrix, s: ActiveFreeSplit) -> np.ndarray:
    """``M_FF^-1 M_FA (M_AA - M_AF M_FF^-1 M_FA)^-1 M_AF``.

    ``S^-1 = (I + E) M_FF^-1`` with ``E`` this matrix; for ``M = A`` it equals
    ``S^-1 A_FF - I``.
    """
    free, active = s.free, s.active
    check_dense_cap(max(free.size, active.size), "approximation_error_term")
    if active.size == 0 or free.size == 0:
        return np.zeros((free.size, free.size))
    M_FF = extract_block(M, free, free)
    M_AA = extract_block(M, active, active)
    M_AF = extract_block(M, active, free)
    Y = _solve_spd(M_FF, M_AF.T)                      # M_FF^-1 M_FA
    T = M_AA - M_AF @ Y
    T = 0.5 * (T + T.T)
    return Y @ _solve_spd(T, M_AF)


def condition_number(M) -> float:
    lam = sym_eigenvalues(M)
    if lam.size == 0 or lam[0] <= 0.0:
        return math.nan
    return float(lam[-1] / lam[0])


def preconditioned_spectrum(A: SparseSymMatrix, s: ActiveFreeSplit,
                            rank_tol: Optional[float] = None) -> SpectrumReport:
    """Eigenvalues of ``S^-1 A_FF`` via the congruence ``L_S^-1 A_FF L_S^-T``."""
    free, active = s.free, s.active
    check_dense_cap(max(free.size, active.size), "preconditioned_spectrum")
    A_AF = extract_block(A, active, free)
    if rank_tol is None:
        rank_tol = max(active.size, free.size, 1) * np.finfo(float).eps
    rank = numeric_rank(A_AF, rank_tol)
    if free.size == 0:
        return SpectrumReport(np.zeros(0), rank, 0, int(active.size), math.nan, rank_tol)
    S = schur_complement(A, s)
    L = dense_cholesky(S).L
    A_FF = extract_block(A, free, free)
    Y = scipy.linalg.solve_triangular(L, A_FF, lower=True, check_finite=False)
    C = scipy.linalg.solve_triangular(L, Y.T, lower=True, check_finite=False)
    C = 0.5 * (C + C.T)
    lam = sym_eigenvalues(C)
    cond = float(lam[-1] / lam[0]) if lam[0] > 0 else math.nan
    return SpectrumReport(lam, rank, int(free.size), int(active.size), cond, rank_tol)


@dataclass
class IterationTraceHook:
    """Solver observer recording free-set size, ``rank(A_AF)`` and condition numbers.

    Pass an instance as ``observer=`` to ``solve``. Failures of the dense
    analysis are stored in the ``error`` field of the row instead of raised.
    """

    A: SparseSymMatrix
    sample_every: int = 1
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if self.sample_every < 1:
            raise ValueError("sample_every must be at least 1")

    def __call__(self, k: int, state) -> None:
        if k % self.sample_every:
            return
        split = state.split
        row = {"iteration": k, "free_size": int(split.free.size), "offdiag_rank": -1,
               "cond_precond": math.nan, "cond_unprecond": math.nan, "error": ""}
        try:
            rep = preconditioned_spectrum(self.A, split)
            row["offdiag_rank"] = rep.rank
            row["cond_precond"] = rep.condition
            if split.free.size:
                row["cond_unprecond"] = condition_number(extract_block(self.A, split.free, split.free))
        except Exception as exc:  # recorded, never fatal to the solve
            row["error"] = f"{type(exc).__name__}: {exc}"
        self.rows.append(row)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows:
            writer.writerow([row[c] for c in TRACE_COLUMNS])
