import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from bridgescale.classical import (NonnegMatrix, check_aat_irreducible, check_fully_indecomposable,
                                   composed_map, jacobian_F, pattern_feasibility, phi_A, phi_A_alpha,
                                   phi_A_alpha_jacobian, prob_vector, solve_classical)
from bridgescale.config import SolverConfig
from bridgescale.errors import (NoConvergenceError, TargetMismatchError, ValidationError,
                                ZeroColumnError, ZeroRowError)

A_BOUNDARY = np.array([[1.0, 1, 0], [0, 1, 1], [1, 0, 1]])
B_LIMIT = np.array([[0, 0.5, 0], [0, 0.5, 0], [1, 0, 1]])
BETA_BOUNDARY = np.array([1 / 6, 1 / 6, 2 / 3])

seeds = st.integers(0, 2**32 - 1)


def rand_simplex(n, rng):
    x = rng.random(n) + 0.05
    return x / x.sum()


def rand_pattern_matrix(n, rng, density=0.6):
    A = rng.random((n, n)) * (rng.random((n, n)) < density)
    A[np.arange(n), rng.permutation(n)] += 0.5  # keep a perfect matching
    return A


def w_basis(n):
    """Orthonormal basis of the sum-zero subspace, as columns."""
    Q, _ = np.linalg.qr(np.eye(n) - 1.0 / n)
    return Q[:, : n - 1]


class TestPhiA:
    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_identity(self, n, rng):
        np.testing.assert_allclose(phi_A(np.eye(n), rand_simplex(n, rng)), np.eye(n), atol=1e-15)

    def test_permutation_is_constant(self, rng):
        P = np.eye(4)[[2, 0, 3, 1]]
        for _ in range(5):
            np.testing.assert_allclose(phi_A(P, rand_simplex(4, rng)), P, atol=1e-15)

    def test_all_ones(self):
        np.testing.assert_allclose(phi_A(np.ones((2, 2)), [0.5, 0.5]), np.full((2, 2), 0.5))

    def test_boundary_limit(self):
        t = 1e-9
        x = np.array([t / 2, t / 2, 1 - t])
        np.testing.assert_allclose(phi_A(A_BOUNDARY, x), B_LIMIT, atol=1e-8)
        alpha = np.full(3, 1 / 3)
        np.testing.assert_allclose(phi_A_alpha(A_BOUNDARY, alpha, x), BETA_BOUNDARY, atol=1e-8)

    def test_zero_column(self):
        with pytest.raises(ZeroColumnError):
            phi_A(np.array([[1.0, 0], [1, 0]]), [0.5, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 7))
    def test_column_stochastic_and_scale_invariant(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rand_pattern_matrix(n, rng)
        x = rand_simplex(n, rng)
        B = phi_A(A, x)
        assert np.abs(B.sum(axis=0) - 1).max() <= 1e-12
        for t in (0.1, 7, 1000):
            assert np.abs(phi_A(A, t * x) - B).max() <= 1e-12


class TestPhiAAlpha:
    def test_doubly_stochastic_at_uniform(self, rng):
        P = np.eye(3)[[1, 2, 0]]
        A = 0.5 * np.eye(3) + 0.3 * P + 0.2 * P @ P
        alpha = rand_simplex(3, rng)
        np.testing.assert_allclose(phi_A_alpha(A, alpha, np.full(3, 1 / 3)), A @ alpha, atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 7))
    def test_positive_and_normalized(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.random((n, n)) + 0.01
        alpha, x = rand_simplex(n, rng), rand_simplex(n, rng)
        y = phi_A_alpha(A, alpha, x)
        # direct summation oracle
        ref = [sum(x[i] * A[i, j] / sum(A[m, j] * x[m] for m in range(n)) * alpha[j]
                   for j in range(n)) for i in range(n)]
        np.testing.assert_allclose(y, ref, rtol=1e-12)
        assert np.all(y > 0) and abs(y.sum() - 1) <= 1e-12

    def test_zero_row(self):
        with pytest.raises(ZeroRowError):
            phi_A_alpha(np.array([[1.0, 1], [0, 0]]), [0.5, 0.5], [0.5, 0.5])


class TestJacobian:
    @settings(max_examples=50, deadline=None)
    @given(seeds, st.integers(2, 7))
    def test_symmetric_kernel_one(self, seed, n):
        rng = np.random.default_rng(seed)
        B = phi_A(rng.random((n, n)) + 0.01, rand_simplex(n, rng))
        F = jacobian_F(B, rand_simplex(n, rng))
        np.testing.assert_array_equal(F, F.T)
        assert np.abs(F @ np.ones(n)).max() <= 1e-12

    def test_positive_on_w_for_positive_B(self, rng):
        for n in (2, 3, 5, 8):
            B = phi_A(rng.random((n, n)) + 0.01, rand_simplex(n, rng))
            Wb = w_basis(n)
            assert np.linalg.eigvalsh(Wb.T @ jacobian_F(B, rand_simplex(n, rng)) @ Wb).min() > 0

    def test_permutation_F_vanishes(self):
        # constant map: zero Jacobian
        P = np.eye(3)[[1, 2, 0]]
        np.testing.assert_allclose(jacobian_F(P, [0.2, 0.3, 0.5]), 0, atol=1e-16)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_euclidean_finite_difference(self, n, rng):
        A = rng.random((n, n)) + 0.05
        alpha, x = rand_simplex(n, rng), rand_simplex(n, rng)
        h = 1e-6
        fd = np.column_stack([(phi_A(A, x + h * e) @ alpha - phi_A(A, x - h * e) @ alpha) / (2 * h)
                              for e in np.eye(n)])
        J = phi_A_alpha_jacobian(A, alpha, x)
        assert np.abs(fd - J).max() <= 1e-5 * np.abs(J).max()

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_chart_finite_difference(self, n, rng):
        # in the chart y -> x * y around y = 1/n the Jacobian is n F
        A = rng.random((n, n)) + 0.05
        alpha, x = rand_simplex(n, rng), rand_simplex(n, rng)
        y0, h = np.full(n, 1.0 / n), 1e-6
        fd = np.column_stack([(phi_A_alpha(A, alpha, x * (y0 + h * e))
                               - phi_A_alpha(A, alpha, x * (y0 - h * e))) / (2 * h)
                              for e in np.eye(n)])
        nF = n * jacobian_F(phi_A(A, x), alpha)
        assert np.abs(fd - nF).max() <= 1e-5 * np.abs(nF).max()

    def test_euclidean_equals_nF_at_uniform(self, rng):
        n = 4
        A = rng.random((n, n)) + 0.05
        alpha = rand_simplex(n, rng)
        u = np.full(n, 1.0 / n)
        np.testing.assert_allclose(phi_A_alpha_jacobian(A, alpha, u),
                                   n * jacobian_F(phi_A(A, u), alpha), atol=1e-14)


def _brute_fully_indecomposable(A):
    P = A > 0
    n = P.shape[0]
    for size in range(1, n):
        for rows in itertools.combinations(range(n), size):
            if P[list(rows)].any(axis=0).sum() < size + 1:
                return False
    return True


def _brute_aat_irreducible(A):
    G = ((A > 0).astype(int) @ (A > 0).T.astype(int)) > 0
    n = G.shape[0]
    reach = np.linalg.matrix_power(G.astype(int) + np.eye(n, dtype=int), n) > 0
    return bool(reach.all())


class TestStructure:
    def test_examples(self):
        assert not check_aat_irreducible(np.eye(3)[[1, 2, 0]])
        assert check_aat_irreducible(np.ones((3, 3)))
        assert check_aat_irreducible(A_BOUNDARY)
        assert not check_fully_indecomposable(np.eye(3))
        assert check_fully_indecomposable(A_BOUNDARY)
        assert check_fully_indecomposable(np.ones((4, 4)))

    def test_n1(self):
        assert check_fully_indecomposable(np.ones((1, 1)))
        assert check_aat_irreducible(np.ones((1, 1)))

    @settings(max_examples=200, deadline=None)
    @given(seeds, st.integers(2, 6), st.floats(0.2, 0.8))
    def test_against_brute_force(self, seed, n, density):
        A = (np.random.default_rng(seed).random((n, n)) < density).astype(float)
        assert check_fully_indecomposable(A) == _brute_fully_indecomposable(A)
        assert check_aat_irreducible(A) == _brute_aat_irreducible(A)

    def test_fully_indecomposable_implies_aat_irreducible(self, rng):
        for _ in range(200):
            A = (rng.random((5, 5)) < 0.5).astype(float)
            if check_fully_indecomposable(A):
                assert check_aat_irreducible(A)

    def test_nonneg_matrix_flags(self):
        M = NonnegMatrix(A_BOUNDARY)
        assert not M.strictly_positive and not M.has_zero_row and not M.has_zero_col
        assert M.aat_irreducible and M.fully_indecomposable
        assert NonnegMatrix(np.array([[1.0, 0], [1, 0]])).has_zero_col
        with pytest.raises(ValueError):
            M.entries[0, 0] = 2.0
        with pytest.raises(ValidationError):
            NonnegMatrix(np.array([[1.0, -1.0], [1, 1]]))


def _lp_max_min_entry(P, r, c):
    """Largest t such that some C with pattern P and margins (r, c) has C >= t on P."""
    cells = list(zip(*np.nonzero(P)))
    m = len(cells)
    A_eq = np.zeros((P.shape[0] + P.shape[1], m + 1))
    for k, (i, j) in enumerate(cells):
        A_eq[i, k] = 1
        A_eq[P.shape[0] + j, k] = 1
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(np.r_[np.zeros(m), -1.0], A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq,
                  b_eq=np.r_[r, c], bounds=[(0, None)] * (m + 1), method="highs")
    return -res.fun if res.status == 0 else -1.0


class TestPatternFeasibility:
    def test_full_pattern(self, rng):
        assert pattern_feasibility(np.ones((3, 4)), [1, 2, 3], [1.5, 1.5, 1.5, 1.5])

    def test_boundary_counterexample(self):
        assert not pattern_feasibility(A_BOUNDARY > 0, 3 * BETA_BOUNDARY, np.ones(3))

    def test_diagonal(self):
        assert pattern_feasibility(np.eye(3), [1, 2, 3], [1, 2, 3])
        assert not pattern_feasibility(np.eye(3), [1, 2, 3], [2, 1, 3])

    def test_mismatch(self):
        with pytest.raises(TargetMismatchError):
            pattern_feasibility(np.ones((2, 2)), [1, 1], [1, 1.5])

    def test_support_alone_is_not_enough(self):
        # a sub-pattern solution exists (C = diag) but the off-diagonal cell must stay positive
        P = np.array([[1, 1], [0, 1]])
        assert not pattern_feasibility(P, [1, 1], [1, 1])
        assert pattern_feasibility(P, [2, 1], [1, 2])

    def test_exact_boundary_regression(self):
        # a sub-pattern solution exists, so the max-min entry is exactly 0
        P = np.array([[0, 1, 1, 1, 1], [0, 1, 0, 1, 1], [1, 0, 0, 1, 1],
                      [1, 1, 0, 1, 0], [0, 0, 1, 0, 0]]) > 0
        r, c = np.array([1.0, 4, 4, 1, 1]), np.array([1.0, 4, 1, 3, 2])
        assert _lp_max_min_entry(P, r, c) <= 1e-12
        assert not pattern_feasibility(P, r, c)

    @settings(max_examples=150, deadline=None)
    @given(seeds, st.integers(2, 5))
    def test_against_lp(self, seed, n):
        rng = np.random.default_rng(seed)
        P = rng.random((n, n)) < 0.55
        P[np.arange(n), rng.permutation(n)] = True
        r = rng.integers(1, 5, n).astype(float)
        c = rng.integers(1, 5, n).astype(float)
        c *= r.sum() / c.sum()
        t = _lp_max_min_entry(P, r, c)
        if 1e-12 < t < 1e-6:
            return  # too close to the boundary for either method to be decisive
        assert pattern_feasibility(P, r, c) == (t > 1e-6)


class TestSolve:
    def test_sinkhorn_case(self, rng):
        n = 5
        A = rng.random((n, n)) + 0.01
        u = np.full(n, 1.0 / n)
        sol = solve_classical(A, u, u)
        assert sol.converged
        assert np.abs(sol.B.sum(axis=0) - 1).max() <= 1e-10
        assert np.abs(sol.B.sum(axis=1) - 1).max() <= 1e-10

    def test_already_bridged(self, rng):
        A = rng.random((4, 4)) + 0.1
        A /= A.sum(axis=0)
        alpha = rand_simplex(4, rng)
        sol = solve_classical(A, alpha, A @ alpha)
        np.testing.assert_allclose(sol.B, A, atol=1e-10)
        np.testing.assert_allclose(sol.d1, np.full(4, 0.25), atol=1e-10)
        np.testing.assert_allclose(sol.x_star, alpha, atol=1e-10)

    def test_boundary_no_convergence(self):
        with pytest.raises(NoConvergenceError) as info:
            solve_classical(A_BOUNDARY, np.full(3, 1 / 3), BETA_BOUNDARY, SolverConfig(max_iter=2000))
        partial = info.value.solution
        assert partial is not None and not partial.converged
        assert partial.residual_bridge > 1e-8

    def test_boundary_alpha_equals_beta(self):
        for alpha in (np.full(3, 1 / 3), BETA_BOUNDARY):
            sol = solve_classical(A_BOUNDARY, alpha, alpha)
            assert sol.converged and sol.residual_bridge <= 1e-11

    def test_n1(self):
        sol = solve_classical(np.array([[2.0]]), [1.0], [1.0])
        assert sol.converged
        np.testing.assert_array_equal(sol.B, [[1.0]])
        assert sol.d1[0] * 2.0 * sol.d2[0] == 1.0

    def test_permutation_only_trivial_targets(self):
        P = np.eye(3)[[1, 2, 0]]
        alpha = np.array([0.2, 0.3, 0.5])
        assert solve_classical(P, alpha, P @ alpha).converged
        with pytest.raises(NoConvergenceError):
            solve_classical(P, alpha, alpha, SolverConfig(max_iter=200))

    def test_validation(self):
        with pytest.raises(ValidationError):
            solve_classical(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5, 0.0])
        with pytest.raises(ValidationError):
            solve_classical(np.ones((2, 2)), [0.6, 0.6], [0.5, 0.5])
        with pytest.raises(ZeroRowError):
            solve_classical(np.array([[1.0, 1], [0, 0]]), [0.5, 0.5], [0.5, 0.5])

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 8))
    def test_positive_matrices_converge(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.random((n, n)) + 0.01
        alpha, beta = rand_simplex(n, rng), rand_simplex(n, rng)
        tol = 1e-11
        sol = solve_classical(A, alpha, beta, SolverConfig(tol=tol))
        assert sol.residual_stoch <= tol and sol.residual_bridge <= tol
        assert np.all((sol.B > 0) == (A > 0))
        B = sol.d1[:, None] * A * sol.d2[None, :]
        assert np.abs(B - sol.B).max() <= 1e-10 * np.abs(B).max()
        assert np.abs(composed_map(A, alpha, beta, sol.x_star) - sol.x_star).sum() <= tol
        assert sol.residual_map <= 10 * tol

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(3, 6))
    def test_fully_indecomposable_uniform(self, seed, n):
        # doubly stochastic scaling always exists for fully indecomposable A
        rng = np.random.default_rng(seed)
        A = rand_pattern_matrix(n, rng, density=0.5)
        if not check_fully_indecomposable(A):
            return
        u = np.full(n, 1.0 / n)
        sol = solve_classical(A, u, u)
        assert sol.converged and sol.residual_bridge <= 1e-11

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(3, 6))
    def test_alpha_equals_beta_when_pattern_admits_it(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rand_pattern_matrix(n, rng, density=0.5)
        alpha = rand_simplex(n, rng)
        if not check_fully_indecomposable(A) or _lp_max_min_entry(A > 0, alpha, alpha) < 1e-4:
            return
        sol = solve_classical(A, alpha, alpha)
        assert sol.converged and sol.residual_bridge <= 1e-11

    def test_alpha_equals_beta_can_be_unreachable(self):
        # J - I is fully indecomposable, yet no zero-diagonal C has row and
        # column sums (0.1, 0.1, 0.8): row 3 would need 0.8 from columns of mass 0.2
        A = np.ones((3, 3)) - np.eye(3)
        alpha = np.array([0.1, 0.1, 0.8])
        assert check_fully_indecomposable(A)
        assert not pattern_feasibility(A > 0, alpha, alpha)
        with pytest.raises(NoConvergenceError):
            solve_classical(A, alpha, alpha, SolverConfig(max_iter=2000))


def test_prob_vector():
    np.testing.assert_array_equal(prob_vector([0.25, 0.75]), [0.25, 0.75])
    for bad in ([0.5, 0.6], [1.0, 0.0], [np.nan, 1.0], []):
        with pytest.raises(ValidationError):
            prob_vector(bad)
