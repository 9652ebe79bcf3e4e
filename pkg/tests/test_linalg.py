import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringadmm.linalg import (
    LsqrResult,
    NonFiniteError,
    SingularMatrixError,
    SparseSystem,
    lsqr,
    solve_dense,
)


def dense_to_system(a: np.ndarray, b: np.ndarray) -> SparseSystem:
    m, n = a.shape
    trips = [(i, j, float(a[i, j])) for i in range(m) for j in range(n)]
    return SparseSystem.from_triplets(m, n, trips, b)


class TestSolveDense:
    def test_identity(self):
        x = solve_dense(np.eye(2), np.array([3.0, -1.0]))
        assert np.allclose(x, [3.0, -1.0], atol=0, rtol=0)

    def test_diagonal(self):
        x = solve_dense(np.diag([2.0, 4.0]), np.array([2.0, 8.0]))
        assert np.allclose(x, [1.0, 2.0], atol=0, rtol=0)

    def test_residual_oracle(self):
        a = np.array([[2.0, 1.0], [1.0, 3.0]])
        b = np.array([3.0, 5.0])
        x = solve_dense(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-12

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            solve_dense(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))

    def test_nonfinite_raises(self):
        with pytest.raises(NonFiniteError):
            solve_dense(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.array([1.0, 1.0]))

    def test_nonsquare_raises(self):
        with pytest.raises(ValueError):
            solve_dense(np.ones((2, 3)), np.ones(2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 4]))
    def test_multiply_back_property(self, seed, p):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((p, p)) + p * np.eye(p)
        b = rng.standard_normal(p)
        x = solve_dense(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-10 * (1 + np.linalg.norm(b))


class TestSparseSystem:
    def test_duplicate_triplets_summed(self):
        system = SparseSystem.from_triplets(
            1, 1, [(0, 0, 2.0), (0, 0, 3.0)], np.array([10.0])
        )
        assert system.matrix().toarray()[0, 0] == 5.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            SparseSystem.from_triplets(2, 2, [(2, 0, 1.0)], np.zeros(2))
        with pytest.raises(ValueError):
            SparseSystem.from_triplets(2, 2, [(0, -1, 1.0)], np.zeros(2))

    def test_rhs_length_checked(self):
        with pytest.raises(ValueError):
            SparseSystem.from_triplets(2, 2, [(0, 0, 1.0)], np.zeros(3))


class TestLsqr:
    def test_identity(self):
        system = dense_to_system(np.eye(3), np.array([1.0, 2.0, 3.0]))
        res = lsqr(system)
        assert res.converged
        assert np.allclose(res.x, [1.0, 2.0, 3.0], atol=1e-12)

    def test_minimum_norm_underdetermined(self):
        system = SparseSystem.from_triplets(
            1, 2, [(0, 0, 1.0), (0, 1, 1.0)], np.array([2.0])
        )
        res = lsqr(system)
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-10)

    def test_planted_solution_recovery(self):
        rng = np.random.default_rng(42)
        a = rng.standard_normal((20, 10))
        x_true = rng.standard_normal(10)
        res = lsqr(dense_to_system(a, a @ x_true), tol=1e-12)
        assert np.linalg.norm(res.x - x_true) <= 1e-8 * np.linalg.norm(x_true)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_agrees_with_dense_solve(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        b = rng.standard_normal(4)
        direct = solve_dense(a, b)
        res = lsqr(dense_to_system(a, b), tol=1e-13)
        assert np.linalg.norm(res.x - direct) <= 1e-8 * (1 + np.linalg.norm(direct))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_residual_history_monotone(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((15, 8))
        b = rng.standard_normal(15)
        res = lsqr(dense_to_system(a, b))
        assert np.all(np.diff(res.residual_history) <= 1e-12)

    def test_nonconvergence_flagged(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((30, 20))
        b = rng.standard_normal(30)
        res = lsqr(dense_to_system(a, b), tol=1e-14, max_iter=2)
        assert isinstance(res, LsqrResult)
        assert not res.converged
        assert res.iterations == 2

    def test_zero_rhs(self):
        res = lsqr(dense_to_system(np.eye(2), np.zeros(2)))
        assert res.converged
        assert np.all(res.x == 0.0)

    def test_bad_tol_rejected(self):
        with pytest.raises(ValueError):
            lsqr(dense_to_system(np.eye(2), np.ones(2)), tol=0.0)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_scipy_least_squares_objective(self, seed):
        # independent solver route: both must reach the same minimal
        # residual norm on an inconsistent rectangular system
        import scipy.sparse.linalg as spla

        rng = np.random.default_rng(seed)
        a = rng.standard_normal((25, 12))
        b = rng.standard_normal(25)
        mine = lsqr(dense_to_system(a, b), tol=1e-12)
        theirs = spla.lsqr(a, b, atol=1e-12, btol=1e-12, iter_lim=1000)
        r_mine = np.linalg.norm(a @ mine.x - b)
        r_theirs = np.linalg.norm(a @ theirs[0] - b)
        assert abs(r_mine - r_theirs) <= 1e-8 * (1 + r_theirs)
