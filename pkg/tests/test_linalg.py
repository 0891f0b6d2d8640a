import math

import numpy as np
import pytest
import scipy.sparse as sp

from facetqp.errors import DenseCapExceeded, DimensionMismatch, NotPositiveDefinite, NotSymmetric
from facetqp.linalg import (
    SparseSymMatrix,
    check_dense_cap,
    cholesky_solve,
    dense_cholesky,
    extract_block,
    norm_estimate,
    numeric_rank,
    spmv,
    sym_eigenvalues,
)
from facetqp.problems import journal_bearing


def cofactor_det(M):
    # Laplace expansion along the first row; independent of any factorization
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    return sum((-1) ** j * M[0, j] * cofactor_det(np.delete(M[1:], j, axis=1)) for j in range(n))


class TestSparseSymMatrix:
    def test_rejects_asymmetric_values(self):
        with pytest.raises(NotSymmetric):
            SparseSymMatrix.from_dense([[1.0, 2.0], [2.0 + 1e-15, 1.0]])

    def test_rejects_unsorted_columns(self):
        with pytest.raises(ValueError):
            SparseSymMatrix(2, [0, 2, 4], [1, 0, 0, 1], [1.0, 2.0, 1.0, 2.0])

    def test_rejects_out_of_range(self):
        with pytest.raises(DimensionMismatch):
            SparseSymMatrix(2, [0, 1, 2], [0, 5], [1.0, 1.0])

    def test_storage_holds_both_triangles(self):
        A = SparseSymMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]])
        assert A.nnz == 4
        np.testing.assert_array_equal(A.indices, [0, 1, 0, 1])

    def test_lower_with_diagonal_inserts_missing_diagonal(self):
        A = SparseSymMatrix.from_dense([[0.0, 1.0], [1.0, 3.0]])
        indptr, indices, data = A.lower_with_diagonal()
        np.testing.assert_array_equal(indptr, [0, 1, 3])
        np.testing.assert_array_equal(indices, [0, 0, 1])
        np.testing.assert_array_equal(data, [0.0, 1.0, 3.0])


class TestSpmv:
    def test_identity(self):
        np.testing.assert_array_equal(spmv(SparseSymMatrix.identity(3), [1.0, 2.0, 3.0]), [1, 2, 3])

    def test_two_by_two(self):
        A = SparseSymMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_array_equal(spmv(A, [1.0, 1.0]), [3.0, 3.0])

    def test_matches_dense_row_products(self, rng, spd):
        M, A = spd(20)
        x = rng.standard_normal(20)
        ref = np.array([sum(M[i, j] * x[j] for j in range(20)) for i in range(20)])
        assert np.max(np.abs(spmv(A, x) - ref)) <= 1e-14 * np.max(np.abs(ref)) * 20

    def test_sparse_pattern(self, rng):
        t = sp.diags([-np.ones(49), 2 * np.ones(50), -np.ones(49)], [-1, 0, 1])
        A = SparseSymMatrix.from_scipy(sp.kronsum(t, t))
        x = rng.standard_normal(2500)
        ref = A.toarray() @ x
        bound = 1e-13 * np.linalg.norm(A.toarray(), 2) * np.linalg.norm(x)
        assert np.max(np.abs(spmv(A, x) - ref)) <= bound

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spmv(SparseSymMatrix.identity(3), np.ones(2))


class TestExtractBlock:
    def test_full_index(self, spd):
        M, A = spd(5)
        np.testing.assert_array_equal(extract_block(A, range(5), range(5)), M)

    def test_identity_offdiagonal(self):
        block = extract_block(SparseSymMatrix.identity(4), [0, 2], [1, 3])
        np.testing.assert_array_equal(block, np.zeros((2, 2)))

    def test_matches_dense_slicing(self, spd):
        M, A = spd(6)
        rows, cols = [0, 3, 5], [1, 2, 4]
        np.testing.assert_array_equal(extract_block(A, rows, cols), M[np.ix_(rows, cols)])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            extract_block(SparseSymMatrix.identity(3), [0, 3], [0])


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(dense_cholesky(np.eye(3)).L, np.eye(3))

    def test_two_by_two(self):
        L = dense_cholesky([[4.0, 2.0], [2.0, 3.0]]).L
        np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], rtol=0, atol=1e-15)

    def test_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            dense_cholesky([[1.0, 2.0], [2.0, 1.0]])

    def test_solve_identity(self):
        np.testing.assert_array_equal(cholesky_solve(dense_cholesky(np.eye(2)), [5.0, 6.0]), [5, 6])

    def test_solve_diagonal(self):
        F = dense_cholesky(np.diag([4.0, 9.0]))
        np.testing.assert_allclose(cholesky_solve(F, [4.0, 9.0]), [1.0, 1.0], rtol=1e-15)

    def test_solve_residual(self, rng, spd):
        M, _ = spd(10)
        r = rng.standard_normal(10)
        z = cholesky_solve(dense_cholesky(M), r)
        assert np.max(np.abs(M @ z - r)) <= 1e-10

    @pytest.mark.parametrize("n", [1, 17, 200])
    def test_factor_and_solve_accuracy(self, rng, spd, n):
        M, _ = spd(n)
        F = dense_cholesky(M)
        assert np.max(np.abs(F.L @ F.L.T - M)) <= n * np.finfo(float).eps * np.abs(M).max() * 10
        r = rng.standard_normal(n)
        assert np.max(np.abs(M @ cholesky_solve(F, r) - r)) <= 1e-9 * np.max(np.abs(r))

    def test_solve_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cholesky_solve(dense_cholesky(np.eye(2)), np.ones(3))


class TestEigenvalues:
    def test_diagonal(self):
        np.testing.assert_allclose(sym_eigenvalues(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])

    def test_two_by_two(self):
        np.testing.assert_allclose(sym_eigenvalues([[2.0, 1.0], [1.0, 2.0]]), [1, 3], rtol=1e-14)

    def test_trace_identity(self, rng):
        B = rng.standard_normal((8, 8))
        M = B + B.T
        assert abs(sym_eigenvalues(M).sum() - np.trace(M)) <= 1e-10

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_sum_and_product(self, rng, n):
        B = rng.standard_normal((n, n))
        M = B + B.T + n * np.eye(n)
        lam = sym_eigenvalues(M)
        assert np.all(np.diff(lam) >= 0)
        assert abs(lam.sum() - np.trace(M)) <= 1e-9 * abs(np.trace(M))
        det = cofactor_det(M)
        assert abs(np.prod(lam) - det) <= 1e-9 * abs(det)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(NotSymmetric):
            sym_eigenvalues([[1.0, 2.0], [0.0, 1.0]])

    def test_tiny_offdiagonal_does_not_overflow(self):
        M = np.array([[1.0, 1e-310], [1e-310, 2.0]])
        np.testing.assert_allclose(sym_eigenvalues(M), [1.0, 2.0])


class TestNormEstimate:
    def test_diagonal(self):
        assert abs(norm_estimate(SparseSymMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))) - 3) <= 1e-4

    def test_identity(self):
        assert norm_estimate(SparseSymMatrix.identity(5)) == pytest.approx(1.0, abs=1e-15)

    def test_zero_matrix(self):
        with pytest.raises(ValueError):
            norm_estimate(SparseSymMatrix.from_dense(np.zeros((3, 3))))

    def test_never_exceeds_spectral_norm(self, spd):
        for n in (3, 10, 30):
            M, A = spd(n)
            assert norm_estimate(A) <= np.linalg.eigvalsh(M)[-1] * (1 + 1e-14)

    def test_journal_bearing_50x50(self):
        problem, _ = journal_bearing(50, 50)
        # LAPACK oracle: the Jacobi path is too slow for a 2500x2500 dense matrix
        lam_max = np.linalg.eigvalsh(problem.A.toarray())[-1]
        est = norm_estimate(problem.A)
        assert 0.99 * lam_max <= est <= lam_max * (1 + 1e-14)

    def test_journal_bearing_small_against_jacobi(self):
        problem, _ = journal_bearing(8, 6)
        lam_max = sym_eigenvalues(problem.A.toarray())[-1]
        est = norm_estimate(problem.A)
        # the all-ones start is nearly orthogonal to the top mode on coarse grids
        assert 0.95 * lam_max <= est <= lam_max * (1 + 1e-12)


class TestNumericRank:
    def test_zero(self):
        assert numeric_rank(np.zeros((3, 4))) == 0

    def test_outer_product(self, rng):
        u, v = rng.standard_normal(4), rng.standard_normal(6)
        assert numeric_rank(np.outer(u, v)) == 1

    def test_constructed_rank(self, rng):
        basis = rng.standard_normal((3, 7))
        M = rng.standard_normal((5, 3)) @ basis
        assert numeric_rank(M) == 3

    def test_full_rank_and_empty(self, rng):
        assert numeric_rank(rng.standard_normal((4, 6))) == 4
        assert numeric_rank(np.zeros((0, 3))) == 0

    def test_negative_tol(self):
        with pytest.raises(ValueError):
            numeric_rank(np.eye(2), tol=-1.0)


def test_dense_cap_env(monkeypatch):
    monkeypatch.setenv("FACETQP_DENSE_CAP", "10")
    check_dense_cap(10)
    with pytest.raises(DenseCapExceeded):
        check_dense_cap(11)
