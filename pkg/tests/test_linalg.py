"""Core linear algebra: SVD, pseudo-inverse, min-norm least squares,
projectors, and the weighted problem, checked against hand oracles."""
import numpy as np
import pytest

from rwgd import (
    Dataset,
    build_weighted_problem,
    kernel_projector,
    min_norm_least_squares,
    pseudo_inverse,
    sigma_min_plus,
    spectral_norm,
    svd,
)


def reconstruct(dec, shape):
    s = np.zeros(shape)
    np.fill_diagonal(s, dec.singular_values)
    return dec.u @ s @ dec.v.T


class TestSvd:
    def test_identity(self):
        dec = svd(np.eye(2))
        assert np.allclose(dec.singular_values, [1.0, 1.0])
        assert dec.rank == 2

    def test_diagonal(self):
        dec = svd(np.diag([3.0, 0.0]))
        assert np.allclose(dec.singular_values, [3.0, 0.0])
        assert dec.rank == 1

    def test_rank_one_column(self):
        # eigenvalues of A^t A = [[5, 0], [0, 0]] give sigma = (sqrt(5), 0)
        a = np.array([[1.0, 0.0], [2.0, 0.0]])
        dec = svd(a)
        assert np.allclose(dec.singular_values, [np.sqrt(5.0), 0.0])
        assert dec.rank == 1

    def test_invariants_random(self, rng):
        for _ in range(50):
            n, d = rng.integers(1, 9), rng.integers(1, 13)
            a = rng.standard_normal((n, d)) * rng.choice([1e-3, 1.0, 1e3])
            dec = svd(a)
            rec = reconstruct(dec, (n, d))
            scale = max(np.linalg.norm(a), 1.0)
            assert np.linalg.norm(rec - a) <= 1e-10 * scale
            assert np.linalg.norm(dec.u.T @ dec.u - np.eye(n)) <= 1e-10
            assert np.linalg.norm(dec.v.T @ dec.v - np.eye(d)) <= 1e-10
            assert np.all(np.diff(dec.singular_values) <= 1e-15)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            svd(np.array([[np.nan, 1.0]]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            svd(np.zeros((0, 3)))


class TestPseudoInverse:
    def test_identity(self):
        assert np.allclose(pseudo_inverse(np.eye(2)), np.eye(2))

    def test_diagonal_keeps_zero(self):
        assert np.allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_rank_one_closed_form(self):
        # for rank one, A^+ = A^t / Tr(A^t A)
        a = np.array([[1.0, 0.0], [2.0, 0.0]])
        assert np.allclose(pseudo_inverse(a), np.array([[0.2, 0.4], [0.0, 0.0]]))

    def test_moore_penrose_battery(self, rng):
        # ||A^t A A^+ - A^t|| <= 1e-9 (1 + ||A||^3) on 200 random matrices
        for _ in range(200):
            n, d = rng.integers(1, 9), rng.integers(1, 13)
            a = rng.standard_normal((n, d)) * rng.choice([1e-2, 1.0, 1e2])
            if rng.random() < 0.3:  # force rank deficiency
                a[:, rng.integers(0, d)] = 0.0
            ap = pseudo_inverse(a)
            lhs = np.linalg.norm(a.T @ a @ ap - a.T, 2)
            assert lhs <= 1e-9 * (1.0 + np.linalg.norm(a, 2) ** 3)

    def test_orthogonality_to_kernel(self, rng):
        # A^+ v is orthogonal to every kernel basis vector
        for _ in range(50):
            n, d = rng.integers(2, 7), rng.integers(2, 9)
            a = rng.standard_normal((n, d))
            a[:, -1] = a[:, 0]  # make the kernel non-trivial
            dec = svd(a)
            kernel_basis = dec.v[:, dec.rank:]
            v = rng.standard_normal(n)
            assert np.all(np.abs(kernel_basis.T @ (pseudo_inverse(a) @ v)) <= 1e-9)


class TestMinNorm:
    def test_identity(self):
        assert np.allclose(min_norm_least_squares(np.eye(2), [1.0, 2.0]), [1.0, 2.0])

    def test_min_norm_among_minimizers_grid(self):
        # brute force over w in [-3, 3]^2: minimizers form {(1, t)}, min-norm (1, 0)
        x = np.array([[1.0, 0.0], [2.0, 0.0]])
        y = np.array([1.0, 2.0])
        grid = np.linspace(-3, 3, 121)
        best = np.inf
        argmins = []
        for w1 in grid:
            for w2 in grid:
                loss = np.sum((x @ [w1, w2] - y) ** 2)
                if loss < best - 1e-12:
                    best = loss
                    argmins = [(w1, w2)]
                elif abs(loss - best) <= 1e-12:
                    argmins.append((w1, w2))
        assert all(abs(w1 - 1.0) < 1e-9 for w1, _ in argmins)
        min_norm_grid = min(argmins, key=lambda w: w[0] ** 2 + w[1] ** 2)
        got = min_norm_least_squares(x, y)
        assert np.allclose(got, min_norm_grid, atol=1e-9)
        assert np.allclose(got, [1.0, 0.0])

    def test_projection_formula(self):
        # full row rank: X^t (X X^t)^{-1} Y
        x = np.array([[1.0, 1.0]])
        y = np.array([2.0])
        expected = x.T @ np.linalg.inv(x @ x.T) @ y
        assert np.allclose(min_norm_least_squares(x, y), expected)
        assert np.allclose(min_norm_least_squares(x, y), [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            min_norm_least_squares(np.eye(2), [1.0, 2.0, 3.0])


class TestSigmaMinPlus:
    def test_examples(self):
        assert sigma_min_plus(np.eye(3)) == pytest.approx(1.0)
        assert sigma_min_plus(np.diag([3.0, 0.0])) == pytest.approx(3.0)
        assert sigma_min_plus(np.array([[1.0, 0.0], [2.0, 0.0]])) == pytest.approx(np.sqrt(5.0))

    def test_zero_matrix(self):
        with pytest.raises(ValueError, match="no nonzero singular value"):
            sigma_min_plus(np.zeros((2, 2)))


class TestKernelProjector:
    def test_examples(self):
        assert np.allclose(kernel_projector(np.eye(2)), np.zeros((2, 2)))
        assert np.allclose(kernel_projector(np.array([[1.0, 0.0]])), np.diag([0.0, 1.0]))
        assert np.allclose(
            kernel_projector(np.array([[1.0, 1.0]])),
            np.array([[0.5, -0.5], [-0.5, 0.5]]),
        )

    def test_idempotent_symmetric(self, rng):
        for _ in range(30):
            a = rng.standard_normal((rng.integers(1, 5), rng.integers(2, 7)))
            p = kernel_projector(a)
            assert np.linalg.norm(p @ p - p, 2) <= 1e-10
            assert np.allclose(p, p.T)
            # projector fixes kernel vectors
            dec = svd(a)
            for j in range(dec.rank, a.shape[1]):
                v = dec.v[:, j]
                assert np.allclose(p @ v, v, atol=1e-10)


class TestFixedPointContraction:
    def test_contraction_and_kernel_preservation(self, rng):
        # (I - X^t X) w contracts by (1 - sigma_min^+) and stays orthogonal
        for _ in range(40):
            n, d = rng.integers(1, 6), rng.integers(2, 7)
            x = rng.standard_normal((n, d))
            x /= (np.linalg.norm(x, 2) ** 2 + 0.5) ** 0.5  # ensure ||X^t X|| < 1
            xx = x.T @ x
            p_row = np.eye(d) - kernel_projector(x)
            w = p_row @ rng.standard_normal(d)
            out = (np.eye(d) - xx) @ w
            rate = 1.0 - sigma_min_plus(xx)
            assert np.linalg.norm(out) <= rate * np.linalg.norm(w) + 1e-12
            assert np.linalg.norm(kernel_projector(x) @ out) <= 1e-9


class TestScalarBounds:
    def test_hadamard_norm_bound(self, rng):
        for _ in range(40):
            n = rng.integers(1, 7)
            a = rng.standard_normal((n, n))
            b = rng.standard_normal((n, n))
            assert np.linalg.norm(a * b, 2) <= np.linalg.norm(a, 2) * np.linalg.norm(b, 2) + 1e-12

    def test_product_to_exponential(self, rng):
        for _ in range(40):
            c = rng.uniform(1e-6, 1 - 1e-6, rng.integers(1, 30))
            assert np.prod(1.0 - c) <= np.exp(-np.sum(c)) + 1e-15


class TestWeightedProblem:
    def test_identity_instance(self):
        wp = build_weighted_problem(Dataset(np.eye(2), [1.0, 1.0]), np.ones(2))
        assert np.allclose(wp.w_hat, [1.0, 1.0])
        assert np.linalg.norm(wp.residual) <= 1e-12

    def test_rank_one_instance(self):
        wp = build_weighted_problem(
            Dataset(np.array([[1.0, 0.0], [2.0, 0.0]]), [1.0, 2.0]), np.ones(2)
        )
        assert np.allclose(wp.w_hat, [1.0, 0.0])
        assert np.linalg.norm(wp.residual) <= 1e-12

    def test_rank_one_weighted_closed_form(self):
        # weighted pseudo-inverse row for the rank-one design with M2 = diag(p^2)
        p1, p2 = 0.8, 0.3
        x11, x21 = 0.4, 1.5
        x = np.array([[x11, 0.0], [x21, 0.0]])
        wp = build_weighted_problem(Dataset(x, [0.0, 0.0]), np.array([p1**2, p2**2]))
        g = pseudo_inverse(wp.x_hat) @ np.diag([p1, p2])
        denom = (p1 * x11) ** 2 + (p2 * x21) ** 2
        expected_row = np.array([p1**2 * x11, p2**2 * x21]) / denom
        assert np.allclose(g[0], expected_row)
        assert np.allclose(g[1], 0.0)

    def test_invariants_random(self, rng):
        for _ in range(30):
            n, d = rng.integers(1, 7), rng.integers(1, 7)
            ds = Dataset(rng.standard_normal((n, d)), rng.standard_normal(n))
            m2 = rng.uniform(0.2, 2.0, n)
            wp = build_weighted_problem(ds, m2)
            # weighted normal equations at the weighted minimizer
            scale = 1.0 + np.linalg.norm(ds.x, 2) ** 2
            assert np.linalg.norm(ds.x.T @ (m2 * wp.residual)) <= 1e-10 * scale
            # minimizer orthogonal to the kernel
            assert np.linalg.norm(kernel_projector(wp.x_hat) @ wp.w_hat) <= 1e-10

    def test_independent_rows_zero_residual(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 5))
            d = n + int(rng.integers(0, 4))
            ds = Dataset(rng.standard_normal((n, d)), rng.standard_normal(n))
            wp = build_weighted_problem(ds, rng.uniform(0.5, 1.5, n))
            assert np.linalg.norm(wp.residual) <= 1e-10

    def test_nonpositive_m2_rejected(self):
        ds = Dataset(np.eye(2), [1.0, 1.0])
        with pytest.raises(ValueError, match="never active"):
            build_weighted_problem(ds, [1.0, 0.0])

    def test_spectral_caches(self, rng):
        ds = Dataset(rng.standard_normal((3, 2)), rng.standard_normal(3))
        wp = build_weighted_problem(ds, np.ones(3))
        assert wp.norm_x == pytest.approx(spectral_norm(ds.x))
        assert wp.norm_xx == pytest.approx(spectral_norm(ds.x.T @ ds.x))
        assert wp.sigma_min_plus_xx_hat == pytest.approx(sigma_min_plus(ds.x.T @ ds.x))
