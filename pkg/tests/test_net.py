import numpy as np
import pytest

from helpers import central_difference, relative_error
from mioflow.net import ACTIVATIONS, AdamW, MultilayerNet, net_from_dict, net_to_dict


def celu_reference(net, x):
    """Scalar-by-scalar recomputation of a CELU network forward pass."""
    a = list(x)
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = [sum(w[o][i] * a[i] for i in range(len(a))) + b[o] for o in range(len(b))]
        if l < net.n_layers - 1:
            a = [v if v > 0 else np.expm1(v) for v in z]
        else:
            a = z
    return np.array(a)


class TestForward:
    def test_zero_net_outputs_zero(self):
        net = MultilayerNet([3, 4, 2], activation="relu", seed=0)
        for w in net.weights:
            w[:] = 0.0
        assert np.all(net.forward(np.ones(3)) == 0.0)

    def test_single_affine_layer(self):
        net = MultilayerNet([1, 1], seed=0)
        net.weights[0][:] = 2.0
        net.biases[0][:] = 1.0
        assert net.forward(np.array([3.0])) == pytest.approx(7.0)

    def test_celu_matches_reference(self):
        rng = np.random.default_rng(1)
        net = MultilayerNet([3, 5, 2], activation="celu", seed=4)
        x = rng.standard_normal(3)
        np.testing.assert_allclose(net.forward(x), celu_reference(net, x), atol=1e-12)

    def test_batch_matches_vector(self):
        net = MultilayerNet([2, 6, 3], activation="leakyrelu", seed=9)
        xs = np.random.default_rng(2).standard_normal((4, 2))
        batch = net.forward(xs)
        for i, x in enumerate(xs):
            np.testing.assert_allclose(batch[i], net.forward(x), atol=1e-14)

    def test_shape_mismatch(self):
        net = MultilayerNet([2, 3], seed=0)
        with pytest.raises(ValueError, match="width"):
            net.forward(np.ones(5))

    def test_relu_positive_homogeneity(self):
        net = MultilayerNet([3, 8, 8, 2], activation="relu", seed=3)
        for b in net.biases:
            b[:] = 0.0
        x = np.random.default_rng(0).standard_normal(3)
        for c in (0.5, 2.0, 7.0):
            np.testing.assert_allclose(net.forward(c * x), c * net.forward(x), atol=1e-12)


class TestBackward:
    def test_identity_quadratic_loss(self):
        net = MultilayerNet([3, 3], seed=0)
        net.weights[0][:] = np.eye(3)
        x = np.array([1.0, -2.0, 0.5])
        y, tape = net.forward(x, record=True)
        _, dx = net.backward(tape, y)  # upstream of 0.5 ||y||^2 is y
        np.testing.assert_allclose(dx, x, atol=1e-14)

    def test_constant_loss_zero_gradient(self):
        net = MultilayerNet([2, 4, 1], seed=5)
        _, tape = net.forward(np.ones(2), record=True)
        grads, dx = net.backward(tape, np.zeros(1))
        assert all(np.all(g == 0) for g in grads)
        assert np.all(dx == 0)

    @pytest.mark.parametrize("activation", ACTIVATIONS)
    @pytest.mark.parametrize("dims", [[2, 8, 3], [3, 16, 32, 16, 5], [4, 8, 32, 2]])
    def test_finite_differences(self, activation, dims):
        rng = np.random.default_rng(hash((activation, tuple(dims))) % 2 ** 32)
        net = MultilayerNet(dims, activation=activation, seed=7)
        x = rng.standard_normal((5, dims[0]))
        target = rng.standard_normal((5, dims[-1]))

        def loss():
            return 0.5 * float(((net.forward(x) - target) ** 2).sum())

        y, tape = net.forward(x, record=True)
        grads, _ = net.backward(tape, y - target)
        fd = central_difference(loss, net.params(), eps=1e-5)
        for g, f in zip(grads, fd):
            assert relative_error(g, f) < 1e-4

    def test_input_gradient_finite_differences(self):
        net = MultilayerNet([3, 6, 2], activation="celu", seed=2)
        x = np.random.default_rng(8).standard_normal((4, 3))

        def loss():
            return 0.5 * float((net.forward(x) ** 2).sum())

        y, tape = net.forward(x, record=True)
        _, dx = net.backward(tape, y)
        fd = central_difference(loss, [x], eps=1e-5)[0]
        assert relative_error(dx, fd) < 1e-4


class TestAdamW:
    def test_hand_computed_first_step(self):
        # m-hat = 1, v-hat = 1 after one unit-gradient step: update is lr,
        # decoupled decay adds lr * wd * w.
        w = np.array([1.0])
        opt = AdamW([w], lr=0.01, weight_decay=0.01)
        opt.step([np.array([1.0])])
        assert w[0] == pytest.approx(1.0 - 0.01 / (1.0 + 1e-8) - 0.0001, abs=1e-9)

    def test_zero_gradient_no_decay(self):
        w = np.array([3.0, -2.0])
        opt = AdamW([w], lr=0.1, weight_decay=0.0)
        opt.step([np.zeros(2)])
        np.testing.assert_array_equal(w, [3.0, -2.0])

    def test_seeded_runs_bitwise_identical(self):
        def run():
            net = MultilayerNet([2, 8, 1], activation="relu", seed=12)
            opt = AdamW(net.params(), lr=0.01, weight_decay=0.01)
            rng = np.random.default_rng(3)
            for _ in range(20):
                x = rng.standard_normal((6, 2))
                y, tape = net.forward(x, record=True)
                grads, _ = net.backward(tape, y)
                opt.step(grads)
            return np.concatenate([p.ravel() for p in net.params()])

        a, b = run(), run()
        assert np.array_equal(a, b)


class TestCheckpoint:
    def test_round_trip(self):
        net = MultilayerNet([3, 16, 32, 16, 4], activation="celu", seed=21)
        restored = net_from_dict(net_to_dict(net))
        x = np.random.default_rng(1).standard_normal((5, 3))
        np.testing.assert_array_equal(net.forward(x), restored.forward(x))

    def test_bad_version_rejected(self):
        data = net_to_dict(MultilayerNet([2, 2], seed=0))
        data["format_version"] = 99
        with pytest.raises(ValueError, match="version"):
            net_from_dict(data)
