import numpy as np
import pytest

from taskldp.data_io import DataMatrix
from taskldp.errors import DimensionMismatch, EmptyData, TooFewSamples
from taskldp.whitening import (
    build_task,
    fit_whitening,
    identity_model,
    radius_bounds,
    unwhiten,
    unwhiten_rows,
    whiten,
    whiten_rows,
)


class TestFitWhitening:
    def test_two_point_1d(self):
        model = fit_whitening(DataMatrix(np.array([[0.0], [2.0]])))
        assert np.allclose(model.mean, [1.0])
        # hand covariance: ((0-1)^2 + (2-1)^2) / (2-1) = 2
        assert np.allclose(model.factor, [[np.sqrt(2.0)]])
        assert model.jitter == 0.0

    def test_identity_covariance_monte_carlo(self):
        rng = np.random.default_rng(5)
        data = DataMatrix(rng.standard_normal((10_000, 4)))
        model = fit_whitening(data)
        assert np.linalg.norm(model.factor - np.eye(4)) <= 0.1

    def test_near_degenerate_gets_jitter(self):
        # tiny noise in a single coordinate: covariance is rank deficient
        rng = np.random.default_rng(6)
        base = np.array([3.0, -1.0, 2.0])
        values = np.tile(base, (20, 1))
        values[:, 0] += 1e-12 * rng.standard_normal(20)
        model = fit_whitening(DataMatrix(values))
        assert np.allclose(model.mean, base, atol=1e-6)
        assert model.jitter > 0.0
        assert np.all(np.diag(model.factor) > 0)

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            fit_whitening(DataMatrix(np.eye(3)[:3]))  # N = 3, need n+1 = 4

    def test_whitened_covariance_close_to_identity(self):
        rng = np.random.default_rng(7)
        n_samples = 10_000
        mix = rng.standard_normal((5, 5))
        data = DataMatrix(rng.standard_normal((n_samples, 5)) @ mix.T + 3.0)
        model = fit_whitening(data)
        h = whiten_rows(model, data.values)
        cov = h.T @ h / (n_samples - 1) - np.outer(
            h.mean(axis=0), h.mean(axis=0)
        ) * n_samples / (n_samples - 1)
        assert np.linalg.norm(cov - np.eye(5)) <= 5.0 / np.sqrt(n_samples)


class TestWhitenUnwhiten:
    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(8)
        data = DataMatrix(rng.standard_normal((50, 3)) + 4.0)
        model = fit_whitening(data)
        assert np.allclose(whiten(model, model.mean), 0.0)

    def test_identity_model_is_identity_map(self):
        model = identity_model(3)
        x = np.array([1.0, -2.0, 0.5])
        assert np.allclose(whiten(model, x), x)
        assert np.allclose(unwhiten(model, x), x)

    def test_round_trip(self):
        rng = np.random.default_rng(9)
        data = DataMatrix(rng.standard_normal((40, 4)) @ rng.standard_normal((4, 4)))
        model = fit_whitening(data)
        x = rng.standard_normal(4)
        assert np.max(np.abs(unwhiten(model, whiten(model, x)) - x)) <= 1e-9
        rows = rng.standard_normal((7, 4))
        assert np.max(np.abs(unwhiten_rows(model, whiten_rows(model, rows)) - rows)) <= 1e-9

    def test_dimension_mismatch(self):
        model = identity_model(3)
        with pytest.raises(DimensionMismatch):
            whiten(model, [1.0, 2.0])


class TestBuildTask:
    def test_identity_everything(self):
        task = build_task(identity_model(3), np.eye(3))
        assert np.allclose(task.task_matrix, np.eye(3))
        assert np.allclose(task.eigenvalues, 1.0)
        assert np.allclose(np.abs(task.eigenvectors), np.eye(3))

    def test_diagonal_weights(self):
        task = build_task(identity_model(2), np.diag([2.0, 1.0]))
        assert np.allclose(task.eigenvalues, [4.0, 1.0])
        assert np.allclose(np.abs(task.eigenvectors), np.eye(2))

    def test_rank_one_row(self):
        task = build_task(identity_model(2), np.array([[1.0, 1.0]]))
        assert np.allclose(task.eigenvalues, [2.0, 0.0], atol=1e-12)
        gram = task.task_matrix.T @ task.task_matrix
        assert np.allclose(
            gram @ task.eigenvectors,
            task.eigenvectors @ np.diag(task.eigenvalues),
            atol=1e-7,
        )
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        assert np.allclose(np.abs(task.eigenvectors[:, 0]), inv_sqrt2)

    def test_spectrum_invariant_under_rotation(self):
        # rotating the data while counter-rotating the task matrix leaves
        # the task spectrum unchanged
        rng = np.random.default_rng(10)
        data = rng.standard_normal((200, 3)) @ rng.standard_normal((3, 3))
        k = rng.standard_normal((2, 3))
        rot, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        base = build_task(fit_whitening(DataMatrix(data)), k)
        turned = build_task(fit_whitening(DataMatrix(data @ rot.T)), k @ rot.T)
        assert np.max(np.abs(base.eigenvalues - turned.eigenvalues)) <= 1e-7

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_task(identity_model(3), np.eye(2))


class TestRadiusBounds:
    def test_exact_sphere(self):
        rng = np.random.default_rng(11)
        pts = rng.standard_normal((100, 3))
        pts = 2.0 * pts / np.linalg.norm(pts, axis=1, keepdims=True)
        r_min, r_max, r_used = radius_bounds(pts)
        assert abs(r_max - 2.0) <= 1e-12
        assert r_used == r_max
        assert r_min <= r_max

    def test_outlier_sets_r_max(self):
        rng = np.random.default_rng(12)
        pts = np.vstack([0.01 * rng.standard_normal((50, 2)), [[5.0, 0.0]]])
        _, r_max, _ = radius_bounds(pts)
        assert abs(r_max - 5.0) <= 1e-12

    def test_centered_square(self):
        pts = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
        r_min, r_max, _ = radius_bounds(pts)
        # facet geometry: faces at distance 1, vertices at sqrt(2)
        assert abs(r_max - np.sqrt(2.0)) <= 1e-12
        assert abs(r_min - 1.0) <= 1e-12

    def test_origin_outside_hull(self):
        pts = np.array([[1.0, 1.0], [2.0, 1.0], [1.0, 2.0], [2.0, 2.0]])
        r_min, _, _ = radius_bounds(pts)
        assert r_min == 0.0

    def test_1d(self):
        r_min, r_max, _ = radius_bounds(np.array([[-0.5], [2.0]]))
        assert r_max == 2.0 and r_min == 0.5

    def test_high_dim_axis_fallback(self):
        pts = np.vstack([np.eye(5), -np.eye(5)])
        r_min, r_max, _ = radius_bounds(pts)
        assert abs(r_max - 1.0) <= 1e-12
        # axis-direction support is 1 in every direction; true inscribed
        # radius of the cross-polytope is 1/sqrt(5), so this is the
        # documented optimistic fallback, still clamped to r_max
        assert r_min == 1.0

    def test_empty(self):
        with pytest.raises(EmptyData):
            radius_bounds(np.zeros((0, 2)))
