import numpy as np
import pytest

from taskldp.errors import BadTarget, DimensionMismatch, TapeMismatch
from taskldp.neural import (
    Layer,
    Net,
    backward,
    clone_net,
    forward,
    identity_net,
    make_net,
    net_from_text,
    net_to_text,
    param_norm_sq,
    parameters,
    pretrain_task,
    task_loss,
)


def random_net(rng, in_dim=None, depth=None):
    in_dim = in_dim or int(rng.integers(1, 11))
    depth = depth or int(rng.integers(1, 4))
    dims = [in_dim] + [int(rng.integers(1, 17)) for _ in range(depth)]
    acts = [str(rng.choice(["identity", "relu", "logistic"])) for _ in range(depth)]
    net = make_net(dims, acts, seed=int(rng.integers(0, 10_000)))
    for layer in net.layers:  # nonzero biases so their gradients are exercised
        layer.bias[:] = 0.1 * rng.standard_normal(layer.bias.shape)
    return net


def finite_diff_input_grad(net, x, upstream, step=1e-5):
    grad = np.zeros_like(x)
    for i in range(x.size):
        hi, lo = x.copy(), x.copy()
        hi[i] += step
        lo[i] -= step
        f_hi = float(np.dot(forward(net, hi)[0], upstream))
        f_lo = float(np.dot(forward(net, lo)[0], upstream))
        grad[i] = (f_hi - f_lo) / (2 * step)
    return grad


def finite_diff_param_grads(net, x, upstream, step=1e-5):
    grads = []
    for p in parameters(net):
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_hi = float(np.dot(forward(net, x)[0], upstream))
            flat[i] = orig - step
            f_lo = float(np.dot(forward(net, x)[0], upstream))
            flat[i] = orig
            gflat[i] = (f_hi - f_lo) / (2 * step)
        grads.append(g)
    return grads


class TestForward:
    def test_identity_layer(self):
        net = identity_net(3)
        x = np.array([1.0, -2.0, 0.5])
        out, _ = forward(net, x)
        assert np.array_equal(out, x)

    def test_relu(self):
        net = Net([Layer(np.eye(2), np.zeros(2), "relu")])
        out, _ = forward(net, np.array([-1.0, 2.0]))
        assert np.array_equal(out, [0.0, 2.0])

    def test_logistic_at_zero(self):
        net = Net([Layer(np.zeros((1, 1)), np.zeros(1), "logistic")])
        out, _ = forward(net, np.array([3.0]))
        assert out[0] == 0.5

    def test_batch_matches_per_sample(self):
        rng = np.random.default_rng(50)
        net = random_net(rng, in_dim=4)
        rows = rng.standard_normal((6, 4))
        batch_out, _ = forward(net, rows)
        for i, row in enumerate(rows):
            single, _ = forward(net, row)
            assert np.allclose(batch_out[i], single)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            forward(identity_net(3), np.ones(2))


class TestBackward:
    def test_single_affine_layer(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        net = Net([Layer(w.copy(), np.zeros(2), "identity")])
        x = np.array([0.5, -1.0])
        g = np.array([1.0, -2.0])
        _, tape = forward(net, x)
        (grads,), dx = backward(net, tape, g)
        dw, db = grads
        assert np.allclose(dw, np.outer(g, x))
        assert np.allclose(db, g)
        assert np.allclose(dx, w.T @ g)

    def test_zero_upstream(self):
        rng = np.random.default_rng(51)
        net = random_net(rng)
        x = rng.standard_normal(net.in_dim)
        _, tape = forward(net, x)
        grads, dx = backward(net, tape, np.zeros(net.out_dim))
        assert np.allclose(dx, 0.0)
        for dw, db in grads:
            assert np.allclose(dw, 0.0) and np.allclose(db, 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(52)
        for _ in range(30):
            net = random_net(rng)
            x = rng.standard_normal(net.in_dim)
            upstream = rng.standard_normal(net.out_dim)
            _, tape = forward(net, x)
            grads, dx = backward(net, tape, upstream)
            fd_dx = finite_diff_input_grad(net, x, upstream)
            scale = max(1.0, np.abs(fd_dx).max())
            assert np.max(np.abs(dx - fd_dx)) <= 1e-6 * scale
            fd_params = finite_diff_param_grads(net, x, upstream)
            flat = [g for pair in grads for g in pair]
            for got, want in zip(flat, fd_params):
                scale = max(1.0, np.abs(want).max())
                assert np.max(np.abs(got - want)) <= 1e-6 * scale

    def test_tape_mismatch(self):
        rng = np.random.default_rng(53)
        net_a = random_net(rng, in_dim=3, depth=1)
        net_b = random_net(rng, in_dim=3, depth=1)
        _, tape = forward(net_a, np.zeros(3))
        with pytest.raises(TapeMismatch):
            backward(net_b, tape, np.zeros(net_b.out_dim))

    def test_batch_grads_sum_over_rows(self):
        rng = np.random.default_rng(54)
        net = random_net(rng, in_dim=3, depth=2)
        rows = rng.standard_normal((5, 3))
        upstream = rng.standard_normal((5, net.out_dim))
        _, tape = forward(net, rows)
        grads, dx = backward(net, tape, upstream)
        acc = [np.zeros_like(p) for p in parameters(net)]
        for i in range(5):
            _, tape_i = forward(net, rows[i])
            grads_i, dx_i = backward(net, tape_i, upstream[i])
            assert np.allclose(dx[i], dx_i)
            for j, (dw, db) in enumerate(grads_i):
                acc[2 * j] += dw
                acc[2 * j + 1] += db
        flat = [g for pair in grads for g in pair]
        for got, want in zip(flat, acc):
            assert np.allclose(got, want)


class TestTaskLoss:
    def test_zero_at_truth(self):
        rng = np.random.default_rng(55)
        net = random_net(rng, in_dim=4)
        x = rng.standard_normal(4)
        value, grad = task_loss(net, "squared_l2", x, x)
        assert value == 0.0
        assert np.allclose(grad, 0.0)

    def test_identity_task(self):
        net = identity_net(3)
        x = np.array([0.0, 1.0, 2.0])
        x_hat = np.array([1.0, 1.0, 0.0])
        value, grad = task_loss(net, "squared_l2", x_hat, x)
        assert abs(value - 5.0) <= 1e-12
        assert np.allclose(grad, 2.0 * (x_hat - x))

    def test_gradient_finite_difference(self):
        rng = np.random.default_rng(56)
        net = random_net(rng, in_dim=5)
        x = rng.standard_normal(5)
        x_hat = x + 0.3 * rng.standard_normal(5)
        value, grad = task_loss(net, "squared_l2", x_hat, x)
        step = 1e-5
        for i in range(5):
            hi, lo = x_hat.copy(), x_hat.copy()
            hi[i] += step
            lo[i] -= step
            fd = (
                task_loss(net, "squared_l2", hi, x)[0]
                - task_loss(net, "squared_l2", lo, x)[0]
            ) / (2 * step)
            assert abs(grad[i] - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_bad_target(self):
        net = identity_net(1)  # identity head produces targets outside [0,1]
        with pytest.raises(BadTarget):
            task_loss(net, "binary_cross_entropy", np.array([0.5]), np.array([3.0]))

    def test_bce_with_logistic_head(self):
        net = Net([Layer(np.array([[2.0]]), np.zeros(1), "logistic")])
        value, grad = task_loss(
            net, "binary_cross_entropy", np.array([0.3]), np.array([0.3])
        )
        assert value >= 0.0
        assert np.allclose(grad, 0.0, atol=1e-9)


class TestPretrainTask:
    def test_linear_regression_converges(self):
        rng = np.random.default_rng(57)
        x = rng.standard_normal((100, 3))
        true_w = np.array([[1.0, -2.0, 0.5]])
        y = x @ true_w.T
        net, final_loss = pretrain_task(x, y, hidden_dims=(), epochs=3000, lr=1e-2)
        assert final_loss < 1e-2

    def test_zero_epochs_returns_initial(self):
        rng = np.random.default_rng(58)
        x = rng.standard_normal((20, 2))
        y = rng.standard_normal(20)
        net, _ = pretrain_task(x, y, hidden_dims=(3,), epochs=0, seed=9)
        fresh = make_net([2, 3, 1], ["relu", "identity"], seed=9)
        for got, want in zip(net.layers, fresh.layers):
            assert np.array_equal(got.weights, want.weights)
            assert np.array_equal(got.bias, want.bias)

    def test_constant_targets(self):
        rng = np.random.default_rng(59)
        x = rng.standard_normal((50, 2))
        y = np.full(50, 3.0)
        net, final_loss = pretrain_task(x, y, hidden_dims=(), epochs=5000, lr=1e-2)
        # analytic optimum: predict the mean everywhere
        preds, _ = forward(net, x)
        assert final_loss < 1e-2
        assert abs(preds.mean() - 3.0) < 0.1


class TestSerialization:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(60)
        net = random_net(rng)
        clone = net_from_text(net_to_text(net))
        for got, want in zip(clone.layers, net.layers):
            assert np.array_equal(got.weights, want.weights)
            assert np.array_equal(got.bias, want.bias)
            assert got.activation == want.activation

    def test_clone_is_independent(self):
        rng = np.random.default_rng(61)
        net = random_net(rng)
        clone = clone_net(net)
        clone.layers[0].weights += 1.0
        assert not np.array_equal(clone.layers[0].weights, net.layers[0].weights)

    def test_param_norm(self):
        net = identity_net(2)
        assert param_norm_sq(net) == 2.0
