import numpy as np
import pytest

from taskldp.errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    SingularTriangular,
)
from taskldp.numerics import (
    cholesky,
    lower_tri_inverse_apply,
    solve_spd,
    sym_eig,
)


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


class TestCholesky:
    def test_known_2x2(self):
        spd = np.array([[4.0, 2.0], [2.0, 5.0]])
        lower = cholesky(spd)
        assert np.allclose(lower, [[2.0, 0.0], [1.0, 2.0]])
        # oracle: multiply back
        assert np.linalg.norm(lower @ lower.T - spd) <= 1e-9 * np.linalg.norm(spd)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_identity(self, n):
        assert np.array_equal(cholesky(np.eye(n)), np.eye(n))

    def test_rank_deficient_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky([[1.0, 1.0], [1.0, 1.0]])

    def test_negative_definite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky([[-1.0]])

    def test_asymmetric_rejected(self):
        with pytest.raises(DimensionMismatch):
            cholesky([[1.0, 0.5], [0.0, 1.0]])

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = rng.integers(1, 9)
            spd = random_spd(rng, n)
            lower = cholesky(spd)
            assert np.all(np.diag(lower) > 0)
            assert np.allclose(np.triu(lower, 1), 0.0)
            rel = np.linalg.norm(lower @ lower.T - spd) / np.linalg.norm(spd)
            assert rel <= 1e-9


class TestSymEig:
    def test_diagonal_input(self):
        values, vecs = sym_eig(np.diag([4.0, 1.0]))
        assert np.allclose(values, [4.0, 1.0])
        assert np.allclose(np.abs(vecs), np.eye(2))

    def test_2x2_known_spectrum(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        values, vecs = sym_eig(m)
        assert np.allclose(values, [3.0, 1.0])
        # oracle: diagonalization property rather than hand-written vectors
        assert np.allclose(vecs.T @ m @ vecs, np.diag(values), atol=1e-10)
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        assert np.allclose(np.abs(vecs[:, 0]), inv_sqrt2)
        assert np.allclose(np.abs(vecs[:, 1]), inv_sqrt2)

    def test_identity(self):
        values, _ = sym_eig(np.eye(3))
        assert np.allclose(values, 1.0)

    def test_reconstruction_and_orthogonality_random(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = rng.integers(1, 9)
            a = rng.standard_normal((n, n))
            sym = 0.5 * (a + a.T)
            values, vecs = sym_eig(sym)
            assert np.all(np.diff(values) <= 1e-12)
            scale = max(1.0, np.max(np.abs(sym)))
            assert np.max(np.abs(vecs @ np.diag(values) @ vecs.T - sym)) <= 1e-8 * scale
            assert np.max(np.abs(vecs.T @ vecs - np.eye(n))) <= 1e-8

    def test_sign_convention(self):
        values, vecs = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        for j in range(vecs.shape[1]):
            nz = np.nonzero(np.abs(vecs[:, j]) > 1e-12)[0]
            assert vecs[nz[0], j] >= 0


class TestSolveSpd:
    def test_identity(self):
        rhs = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.allclose(solve_spd(np.eye(2), rhs), rhs)

    def test_diagonal_inverse(self):
        x = solve_spd(np.diag([2.0, 4.0]), np.eye(2))
        assert np.allclose(x, np.diag([0.5, 0.25]))

    def test_residual_random(self):
        rng = np.random.default_rng(3)
        spd = random_spd(rng, 4)
        rhs = rng.standard_normal((4, 3))
        x = solve_spd(spd, rhs)
        rel = np.linalg.norm(spd @ x - rhs) / np.linalg.norm(rhs)
        assert rel <= 1e-8

    def test_vector_rhs(self):
        rng = np.random.default_rng(4)
        spd = random_spd(rng, 5)
        rhs = rng.standard_normal(5)
        x = solve_spd(spd, rhs)
        assert x.shape == (5,)
        assert np.linalg.norm(spd @ x - rhs) <= 1e-8 * np.linalg.norm(rhs)

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefinite):
            solve_spd([[0.0, 0.0], [0.0, 1.0]], np.eye(2))


class TestLowerTriInverseApply:
    def test_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        assert np.allclose(lower_tri_inverse_apply(np.eye(3), v), v)

    def test_forward_substitution(self):
        lower = np.array([[2.0, 0.0], [1.0, 2.0]])
        v = np.array([4.0, 6.0])
        x = lower_tri_inverse_apply(lower, v)
        assert np.allclose(x, [2.0, 2.0])
        assert np.linalg.norm(lower @ x - v) <= 1e-10

    def test_singular(self):
        with pytest.raises(SingularTriangular):
            lower_tri_inverse_apply([[0.0, 0.0], [0.0, 1.0]], [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            lower_tri_inverse_apply(np.eye(2), [1.0, 2.0, 3.0])
