import numpy as np
import pytest

from app.core.errors import DegenerateInputError, NumericError, ShapeError, StateError
from app.module.numkit.checkpoint import decode_mlp, encode_mlp
from app.module.numkit.functional import l2_normalize, softmax
from app.module.numkit.gradcheck import ABS_FLOOR, grad_check
from app.module.numkit.layers import DenseLayer, GradSet, Mlp
from app.module.numkit.optim import AdamState, adam_step


def single_unit(weight: float, bias: float, activation: str = "relu") -> Mlp:
    return Mlp([DenseLayer(weights=np.array([[weight]]), bias=np.array([bias]), activation=activation)])


class TestForward:
    def test_zero_weights_give_zero_output(self, rng):
        net = Mlp.build([5, 4, 3], ["relu", "relu"], seed=0)
        for layer in net.layers:
            layer.weights.fill(0.0)
            layer.bias.fill(0.0)
        assert np.array_equal(net.forward(rng.normal(size=(6, 5))), np.zeros((6, 3)))

    def test_hand_evaluated_unit(self):
        assert single_unit(2.0, 1.0).forward([[3.0]])[0, 0] == 7.0

    def test_dropout_disabled_matches_eval(self, rng):
        net = Mlp.build([4, 6, 2], ["relu", "identity"], seed=1, dropout_rate=0.0)
        x = rng.normal(size=(3, 4))
        assert np.array_equal(net.forward(x, training=True, seed=9), net.forward(x))

    def test_dropout_only_when_training(self, rng):
        net = Mlp.build([4, 32, 2], ["relu", "identity"], seed=1, dropout_rate=0.5)
        x = rng.uniform(size=(8, 4))
        assert np.array_equal(net.forward(x), net.forward(x))
        assert np.array_equal(net.forward(x, training=True, seed=3), net.forward(x, training=True, seed=3))
        assert not np.array_equal(net.forward(x, training=True, seed=3), net.forward(x))

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            Mlp.build([3, 2], ["relu"], seed=0).forward(np.ones((1, 4)))


class TestBackward:
    def test_zero_upstream(self, rng):
        net = Mlp.build([3, 5, 2], ["relu", "identity"], seed=2)
        net.forward(rng.normal(size=(4, 3)))
        grads, dx = net.backward(np.zeros((4, 2)))
        assert all(not np.any(value) for value in grads.values())
        assert not np.any(dx)

    def test_squared_loss_hand_calculus(self):
        net = single_unit(1.0, 0.0, activation="identity")
        out = net.forward([[1.0]])
        grads, _ = net.backward(2.0 * (out - 2.0))
        assert grads["layers.0.weight"][0, 0] == -2.0

    def test_backward_needs_forward(self):
        with pytest.raises(StateError):
            Mlp.build([2, 2], ["relu"], seed=0).backward(np.ones((1, 2)))

    def test_random_net_matches_finite_differences(self, rng):
        net = Mlp.build([4, 6, 3], ["relu", "identity"], seed=5)
        x = rng.normal(size=(5, 4))
        target = rng.normal(size=(5, 3))

        def loss_fn(_params):
            out = net.forward(x)
            grads, _ = net.backward((out - target) / x.shape[0])
            return float(0.5 * np.sum((out - target) ** 2) / x.shape[0]), grads

        assert grad_check(loss_fn, net.parameters(), tolerance=1e-4).passed


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        params = {"w": np.array([1.5, -2.0])}
        state = AdamState.for_params(params)
        adam_step(params, GradSet({"w": np.zeros(2)}), state)
        assert np.array_equal(params["w"], [1.5, -2.0])
        assert state.step == 1

    def test_first_step_magnitude(self):
        params = {"w": np.array([0.0])}
        adam_step(params, GradSet({"w": np.array([1.0])}), AdamState.for_params(params))
        assert params["w"][0] == pytest.approx(-1e-3 / (1.0 + 1e-8), rel=1e-12)
        assert params["w"][0] == pytest.approx(-9.99999995e-4, rel=1e-7)

    def test_shape_mismatch(self):
        params = {"w": np.zeros(3)}
        with pytest.raises(ShapeError):
            adam_step(params, GradSet({"w": np.zeros(2)}), AdamState.for_params(params))

    def test_non_positive_learning_rate(self):
        with pytest.raises(NumericError):
            AdamState.for_params({"w": np.zeros(1)}, learning_rate=0.0)


class TestGradCheck:
    def test_quadratic(self):
        params = {"w": np.array([3.0])}

        def loss_fn(p):
            return float(p["w"][0] ** 2), {"w": 2.0 * p["w"]}

        report = grad_check(loss_fn, params, tolerance=1e-6)
        assert report.passed
        assert params["w"][0] == 3.0

    def test_corrupted_gradient_fails(self):
        params = {"w": np.array([3.0])}

        def loss_fn(p):
            return float(p["w"][0] ** 2), {"w": 2.0 * p["w"] + 0.1}

        assert not grad_check(loss_fn, params, tolerance=1e-4).passed

    def test_small_gradient_errors_are_caught(self):
        params = {"w": np.array([1e-3])}

        def loss_fn(p, offset=0.0):
            return float(0.5e-3 * p["w"][0] ** 2), {"w": 1e-3 * p["w"] + offset}

        assert grad_check(loss_fn, params, tolerance=1e-4).passed
        report = grad_check(lambda p: loss_fn(p, offset=5e-8), params, tolerance=1e-4)
        assert not report.passed
        assert report.absolute_floor == ABS_FLOOR

    def test_vanishing_gradient_tolerates_difference_noise(self):
        params = {"w": np.array([0.0])}
        report = grad_check(lambda p: (float(p["w"][0] ** 3), {"w": 3.0 * p["w"] ** 2}), params, tolerance=1e-4)
        assert report.passed
        assert report.max_relative_error < 1e-5

    def test_non_finite_loss(self):
        with pytest.raises(NumericError):
            grad_check(lambda p: (float("nan"), {"w": np.zeros(1)}), {"w": np.zeros(1)})


class TestFunctional:
    def test_softmax_symmetric(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-12)

    def test_softmax_hand_values(self):
        assert np.allclose(softmax([1.0, -0.5, -0.5]), [0.6914, 0.1543, 0.1543], atol=1e-4)

    def test_softmax_large_scores(self):
        assert np.allclose(softmax([1000.0, 0.0]), [1.0, 0.0])

    def test_softmax_empty(self):
        with pytest.raises(ShapeError):
            softmax([])

    def test_l2_normalize(self):
        assert np.allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-12)
        unit = np.array([0.0, 1.0, 0.0])
        assert np.allclose(l2_normalize(unit), unit)

    def test_l2_normalize_zero(self):
        with pytest.raises(DegenerateInputError):
            l2_normalize([0.0, 0.0])


def test_mlp_checkpoint_restores_weights(rng):
    net = Mlp.build([3, 4, 2], ["relu", "identity"], seed=11, dropout_rate=0.2)
    restored = decode_mlp(encode_mlp(net))
    x = rng.normal(size=(2, 3))
    assert np.array_equal(restored.forward(x), net.forward(x))
    assert restored.dropout_rate == 0.2
