import numpy as np
import pytest
import scipy.sparse as sp

from facetqp.constraints import ActiveFreeSplit, classify
from facetqp.errors import (
    BreakdownNonpositivePivot,
    NotPositiveDefinite,
    StaleFactorization,
    ZeroDiagonal,
)
from facetqp.linalg import SparseSymMatrix
from facetqp.preconditioners import (
    DENSE_EXACT_LIMIT,
    FaceStrategy,
    approx_face_apply,
    build_inner,
    ensure_face_current,
    face_apply,
)
from facetqp.problems import journal_bearing, obstacle_laplace_2d
from facetqp.solvers import SolverConfig, solve

from conftest import random_spd


def _split(n, lower=(), upper=()):
    lo = np.zeros(n, bool)
    up = np.zeros(n, bool)
    lo[list(lower)] = True
    up[list(upper)] = True
    return ActiveFreeSplit.from_masks(lo, up)


def _operator_matrix(h, size):
    return np.column_stack([h.apply(e) for e in np.eye(size)])


def _tridiag(n, d=4.0, o=-1.0):
    return SparseSymMatrix.from_scipy(sp.diags([o, d, o], [-1, 0, 1], shape=(n, n)))


class TestInner:
    @pytest.mark.parametrize("kind", ["cholesky", "ic0", "ssor"])
    def test_identity(self, kind):
        h = build_inner(SparseSymMatrix.identity(5), np.arange(5), kind)
        r = np.arange(5.0) - 2
        np.testing.assert_allclose(h.apply(r), r, rtol=0, atol=1e-15)

    def test_cholesky_exact_dense(self, spd):
        M, A = spd(12)
        h = build_inner(A, np.arange(12), "cholesky")
        r = np.linspace(-1, 1, 12)
        np.testing.assert_allclose(M @ h.apply(r), r, atol=1e-11)

    def test_cholesky_exact_sparse_branch(self):
        n = DENSE_EXACT_LIMIT + 41
        A = _tridiag(n)
        h = build_inner(A, np.arange(n), "cholesky")
        r = np.cos(np.arange(n))
        np.testing.assert_allclose(A.to_scipy() @ h.apply(r), r, atol=1e-12)

    def test_cholesky_rejects_indefinite_sparse(self):
        n = DENSE_EXACT_LIMIT + 5
        A = _tridiag(n, d=1.0, o=-1.0)
        with pytest.raises(NotPositiveDefinite):
            build_inner(A, np.arange(n), "cholesky")

    def test_cholesky_rejects_indefinite_dense(self):
        A = SparseSymMatrix.from_dense(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(NotPositiveDefinite):
            build_inner(A, [0, 1], "cholesky")

    def test_ic0_tridiagonal_is_exact(self):
        # no fill appears in a tridiagonal factor
        A = _tridiag(30)
        h = build_inner(A, np.arange(30), "ic0")
        np.testing.assert_allclose(_operator_matrix(h, 30), np.linalg.inv(A.toarray()), atol=1e-13)

    def test_ic0_on_grid_is_spd_and_not_exact(self):
        prob, _ = obstacle_laplace_2d(6)
        h = build_inner(prob.A, np.arange(prob.n), "ic0")
        P = _operator_matrix(h, prob.n)
        np.testing.assert_allclose(P, P.T, atol=1e-13)
        assert np.linalg.eigvalsh((P + P.T) / 2).min() > 0
        assert np.abs(P - np.linalg.inv(prob.A.toarray())).max() > 1e-6

    def test_ic0_factor_reproduces_pattern_entries(self):
        # L L^T matches A on the lower pattern of A
        from facetqp import _kernels
        prob, _ = obstacle_laplace_2d(5)
        indptr, indices, data = prob.A.lower_with_diagonal()
        L, status = _kernels.ic0_factor(indptr, indices, data)
        assert status < 0
        Ld = sp.csr_matrix((L, indices, indptr), shape=(prob.n, prob.n)).toarray()
        LLt = Ld @ Ld.T
        rows = np.repeat(np.arange(prob.n), np.diff(indptr))
        np.testing.assert_allclose(LLt[rows, indices], data, atol=1e-13)

    def test_ic0_breakdown_and_shift(self):
        # indefinite 4-cycle: IC(0) meets a negative pivot
        M = np.array([[1.0, -0.8, 0.0, -0.8],
                      [-0.8, 1.0, -0.8, 0.0],
                      [0.0, -0.8, 1.0, -0.8],
                      [-0.8, 0.0, -0.8, 1.0]])
        A = SparseSymMatrix.from_dense(M)
        if np.linalg.eigvalsh(M).min() > 0:
            pytest.skip("example happens to be definite")
        with pytest.raises(BreakdownNonpositivePivot):
            build_inner(A, np.arange(4), "ic0")

    def test_ic0_shift_recovers(self):
        # slightly indefinite pivot recovered by the diagonal shift
        M = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-4]])
        A = SparseSymMatrix.from_dense(M)
        with pytest.raises(BreakdownNonpositivePivot):
            build_inner(A, [0, 1], "ic0")
        h = build_inner(A, [0, 1], "ic0", ic0_shift=True)
        assert np.all(np.isfinite(h.apply(np.ones(2))))

    def test_ssor_diagonal_gives_inverse_diagonal(self):
        A = SparseSymMatrix.from_dense(np.diag([2.0, 4.0, 8.0]))
        h = build_inner(A, np.arange(3), "ssor")
        np.testing.assert_allclose(h.apply(np.ones(3)), [0.5, 0.25, 0.125], rtol=1e-15)
        for omega in (0.5, 1.5):
            h = build_inner(A, np.arange(3), "ssor", omega=omega)
            expect = omega * (2 - omega) * np.array([0.5, 0.25, 0.125])
            np.testing.assert_allclose(h.apply(np.ones(3)), expect, rtol=1e-15)

    def test_ssor_matches_textbook_formula(self, spd):
        M, A = spd(9)
        omega = 1.3
        D = np.diag(np.diag(M))
        Lo = np.tril(M, -1)
        P = (D + omega * Lo) @ np.linalg.inv(D) @ (D + omega * Lo).T / (omega * (2 - omega))
        h = build_inner(A, np.arange(9), "ssor", omega=omega)
        np.testing.assert_allclose(_operator_matrix(h, 9), np.linalg.inv(P), rtol=1e-10, atol=1e-12)

    def test_ssor_errors(self):
        A = SparseSymMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 2.0]]))
        with pytest.raises(ZeroDiagonal):
            build_inner(A, [0, 1], "ssor")
        with pytest.raises(ValueError):
            build_inner(SparseSymMatrix.identity(2), [0, 1], "ssor", omega=2.0)

    def test_bad_kind_and_empty(self):
        with pytest.raises(ValueError):
            build_inner(SparseSymMatrix.identity(2), [0, 1], "ilu")
        with pytest.raises(ValueError):
            build_inner(SparseSymMatrix.identity(2), [], "cholesky")

    def test_wrong_length(self):
        h = build_inner(SparseSymMatrix.identity(3), [0, 2], "cholesky")
        with pytest.raises(ValueError):
            h.apply(np.ones(3))


class TestFaceApply:
    def test_diagonal_example(self):
        A = SparseSymMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))
        s = _split(3, lower=[1])
        h = build_inner(A, s.free, "cholesky")
        np.testing.assert_allclose(face_apply(h, [1.0, 0.0, 3.0], s), [1.0, 0.0, 1.0])

    def test_stale(self):
        A = SparseSymMatrix.from_dense(np.diag([1.0, 2.0, 3.0]))
        h = build_inner(A, [0, 2], "cholesky")
        with pytest.raises(StaleFactorization):
            face_apply(h, np.ones(3), _split(3))

    def test_matches_block_solve(self, rng):
        M0 = random_spd(rng, 15, 1.0)
        A = SparseSymMatrix.from_dense(M0)
        s = _split(15, lower=[1, 4, 7], upper=[10])
        g = np.zeros(15)
        g[s.free] = rng.standard_normal(s.free.size)
        h = build_inner(A, s.free, "cholesky")
        z = face_apply(h, g, s)
        expect = np.zeros(15)
        expect[s.free] = np.linalg.solve(M0[np.ix_(s.free, s.free)], g[s.free])
        np.testing.assert_allclose(z, expect, atol=1e-12)

    def test_approx_example(self):
        A = SparseSymMatrix.from_dense(np.array([[4.0, 1.0], [1.0, 3.0]]))
        h = build_inner(A, [0, 1], "cholesky")
        z = approx_face_apply(h, [1.0, 0.0], _split(2, upper=[1]))
        np.testing.assert_allclose(z, [3.0 / 11.0, 0.0], rtol=1e-14)

    def test_approx_nothing_active_is_raw(self, spd):
        M, A = spd(6)
        h = build_inner(A, np.arange(6), "cholesky")
        g = np.arange(6.0)
        np.testing.assert_array_equal(approx_face_apply(h, g, _split(6)), h.apply(g))

    def test_approx_equals_schur_inverse(self, rng):
        # zeroed full solve == S^{-1} on the free block
        M0 = random_spd(rng, 10, 0.5)
        A = SparseSymMatrix.from_dense(M0)
        s = _split(10, lower=[0, 3], upper=[8])
        F, Ac = s.free, s.active
        S = M0[np.ix_(F, F)] - M0[np.ix_(F, Ac)] @ np.linalg.solve(M0[np.ix_(Ac, Ac)], M0[np.ix_(Ac, F)])
        h = build_inner(A, np.arange(10), "cholesky")
        g = np.zeros(10)
        g[F] = rng.standard_normal(F.size)
        z = approx_face_apply(h, g, s)
        np.testing.assert_allclose(z[F], np.linalg.inv(S) @ g[F], atol=1e-10)
        assert np.all(z[Ac] == 0.0)


class TestEnsureFaceCurrent:
    def test_counter(self):
        A = SparseSymMatrix.identity(4)
        s1, s2 = _split(4, lower=[0]), _split(4, lower=[1])
        h = ensure_face_current(None, s1, A, "cholesky")
        assert h.build_count == 1
        assert ensure_face_current(h, s1, A, "cholesky") is h
        h2 = ensure_face_current(h, s2, A, "cholesky")
        assert h2.build_count == 2 and h2.subset.tolist() == [0, 2, 3]


def _replay_rebuilds(free_sets):
    last, count = None, 0
    for f in free_sets:
        if f.size == 0:
            continue
        if last is None or not np.array_equal(last, f):
            count += 1
            last = f
    return count


class TestFaceStrategy:
    @pytest.mark.parametrize("method", ["mprgp", "mppcg"])
    @pytest.mark.parametrize("kind", ["cholesky", "ic0"])
    def test_rebuilds_replay(self, method, kind):
        prob, box = journal_bearing(30, 12)
        cfg = SolverConfig.for_method(method, face_mode="face", inner_kind=kind,
                                      record_free_sets=True)
        rep = solve(prob, box, cfg=cfg)
        assert rep.converged
        assert rep.face_rebuilds == _replay_rebuilds(rep.free_sets)
        assert rep.face_rebuilds > 1

    def test_approx_builds_once(self):
        prob, box = journal_bearing(30, 12)
        rep = solve(prob, box, cfg=SolverConfig.for_method("mppcg", face_mode="approx"))
        assert rep.converged and rep.face_rebuilds == 1

    def test_empty_free_set_returns_zero(self):
        fs = FaceStrategy(SparseSymMatrix.identity(2), "face", "cholesky")
        z = fs(np.zeros(2), _split(2, lower=[0, 1]))
        np.testing.assert_array_equal(z, np.zeros(2))
        assert fs.rebuilds == 0 and fs.applies == 1

    def test_fixed_superset(self):
        M0 = np.diag([2.0, 4.0, 8.0, 16.0])
        fs = FaceStrategy(SparseSymMatrix.from_dense(M0), "face", "cholesky", fixed_free=[0, 1])
        s = _split(4, lower=[3])
        z = fs(np.array([1.0, 1.0, 1.0, 0.0]), s)
        # index 2 is free but outside the fixed set, so it passes through
        np.testing.assert_allclose(z, [0.5, 0.25, 1.0, 0.0])
        fs(np.array([1.0, 1.0, 1.0, 1.0]), _split(4))
        assert fs.rebuilds == 1

    def test_fixed_superset_solve_converges(self):
        prob, box = journal_bearing(20, 10)
        free = solve(prob, box).x > 0
        cfg = SolverConfig(face_mode="face", fixed_free=np.flatnonzero(free))
        rep = solve(prob, box, cfg=cfg)
        assert rep.converged and rep.face_rebuilds == 1

    def test_bad_mode_and_index(self):
        A = SparseSymMatrix.identity(3)
        with pytest.raises(ValueError):
            FaceStrategy(A, "none", "cholesky")
        with pytest.raises(IndexError):
            FaceStrategy(A, "face", "cholesky", fixed_free=[5])
