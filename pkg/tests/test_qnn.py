"""Variational classifier: forward pass, loss, gradients, Adam, training."""

import numpy as np
import pytest

from qfuse import qnn, sim
from qfuse.errors import DataError
from qfuse.qnn import QnnParams, TrainConfig

from helpers import finite_difference_grad, logistic_regression_accuracy


def small_config(n_qubits=2, layers=2, **kw):
    defaults = dict(n_qubits=n_qubits, layers=layers, epochs=5, batch_size=8, seed=3)
    defaults.update(kw)
    return TrainConfig(**defaults)


def separable_set(n=80, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    centers = np.array([[-0.9, -0.9], [0.9, 0.9]])
    X = centers[y] + 0.25 * rng.normal(size=(n, 2))
    return X, y.astype(float)


class TestForward:
    def test_zero_readout_gives_half(self):
        params = QnnParams(np.random.default_rng(0).uniform(0, 6, (2, 3, 3)), np.zeros(3), 0.0)
        _, prob = qnn.qnn_forward(np.array([0.4, -1.0, 2.2]), params)
        assert prob == 0.5

    def test_ground_state_all_up(self):
        n = 3
        params = QnnParams(np.zeros((1, n, 3)), np.ones(n), 0.0)
        logit, prob = qnn.qnn_forward(np.zeros(n), params)
        assert logit == pytest.approx(n, abs=1e-12)
        assert prob == pytest.approx(1 / (1 + np.exp(-n)), abs=1e-12)

    def test_random_instance_finite(self):
        rng = np.random.default_rng(1)
        params = QnnParams(rng.uniform(0, 2 * np.pi, (2, 4, 3)), rng.normal(size=4), 0.3)
        logit, prob = qnn.qnn_forward(rng.normal(size=4), params)
        assert np.isfinite(logit) and 0.0 < prob < 1.0

    def test_dimension_mismatch(self):
        params = QnnParams(np.zeros((1, 2, 3)), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            qnn.qnn_forward(np.zeros(3), params)

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(2)
        params = QnnParams(rng.uniform(0, 2 * np.pi, (2, 3, 3)), rng.normal(size=3), -0.2)
        X = rng.normal(size=(5, 3))
        logits, probs, _ = qnn.forward_batch(X, params)
        for i, x in enumerate(X):
            logit, prob = qnn.qnn_forward(x, params)
            assert logits[i] == pytest.approx(logit, abs=1e-12)
            assert probs[i] == pytest.approx(prob, abs=1e-12)


class TestBceLoss:
    def test_perfect_predictions(self):
        assert qnn.bce_loss(np.array([1.0, 0.0, 1.0]), np.array([1.0, 0.0, 1.0])) <= 1e-10

    def test_coin_flip_is_ln2(self):
        assert qnn.bce_loss(np.full(7, 0.5), np.array([0, 1, 0, 1, 1, 0, 1.0])) == pytest.approx(
            np.log(2), abs=1e-12
        )

    def test_hand_value(self):
        assert qnn.bce_loss(np.array([0.9]), np.array([0.0])) == pytest.approx(
            -np.log(0.1), abs=1e-9
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            qnn.bce_loss(np.array([0.5]), np.array([0.0, 1.0]))


class TestParameterShift:
    def test_zero_readout_kills_theta_gradient(self):
        rng = np.random.default_rng(3)
        params = QnnParams(rng.uniform(0, 2 * np.pi, (2, 3, 3)), np.zeros(3), 0.0)
        grads = qnn.parameter_shift_grad(rng.normal(size=3), params, 1.0)
        np.testing.assert_allclose(grads.theta, 0.0, atol=1e-15)

    def test_single_qubit_zero_weight(self):
        rng = np.random.default_rng(4)
        params = QnnParams(np.zeros((1, 1, 3)), np.zeros(1), 0.0)
        grads = qnn.parameter_shift_grad(rng.normal(size=1), params, 0.0)
        np.testing.assert_allclose(grads.theta, 0.0, atol=1e-15)

    def test_bias_gradient_is_residual(self):
        rng = np.random.default_rng(5)
        params = QnnParams(rng.uniform(0, 2 * np.pi, (2, 2, 3)), rng.normal(size=2), 0.1)
        x = rng.normal(size=2)
        _, prob = qnn.qnn_forward(x, params)
        grads = qnn.parameter_shift_grad(x, params, 1.0)
        assert grads.b == pytest.approx(prob - 1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        layers = int(rng.integers(1, 3))
        params = QnnParams(
            rng.uniform(0, 2 * np.pi, (layers, n, 3)), rng.normal(size=n), float(rng.normal())
        )
        x = rng.normal(size=n)
        label = float(rng.integers(0, 2))
        wiring = sim.SelWiring.ring(n, layers)

        def loss_of(flat):
            p = QnnParams(flat[: params.theta.size].reshape(params.theta.shape),
                          flat[params.theta.size : -1], float(flat[-1]))
            _, prob = qnn.qnn_forward(x, p, wiring=wiring)
            return qnn.bce_loss(np.array([prob]), np.array([label]))

        flat = np.concatenate([params.theta.ravel(), params.w, [params.b]])
        expected = finite_difference_grad(loss_of, flat, h=1e-4)
        grads = qnn.parameter_shift_grad(x, params, label, wiring=wiring)
        got = np.concatenate([grads.theta.ravel(), grads.w, [grads.b]])
        np.testing.assert_allclose(got, expected, atol=1e-5)


class TestAdam:
    def test_zero_gradient_no_move(self):
        values = np.array([1.0, -2.0])
        out, _, _ = qnn.adam_step(values, np.zeros(2), np.zeros(2), np.zeros(2), 0.01, 1)
        np.testing.assert_array_equal(out, values)

    def test_first_step_is_lr_times_sign(self):
        g = np.array([0.5, -0.2])
        out, _, _ = qnn.adam_step(np.zeros(2), g, np.zeros(2), np.zeros(2), 0.01, 1)
        np.testing.assert_allclose(out, -0.01 * np.sign(g), atol=1e-6)

    def test_constant_gradient_step_approaches_lr(self):
        g = np.array([0.3])
        values, m, v = np.zeros(1), np.zeros(1), np.zeros(1)
        for t in range(1, 2001):
            new, m, v = qnn.adam_step(values, g, m, v, 0.01, t)
            step = new - values
            values = new
        assert step[0] == pytest.approx(-0.01, abs=1e-4)


class TestTraining:
    def test_separable_set_beats_logistic_oracle_bar(self):
        X, y = separable_set()
        assert logistic_regression_accuracy(X, y) >= 0.95  # oracle can do it
        config = small_config(epochs=30, learning_rate=0.1, batch_size=16)
        params, history = qnn.train_qnn(X, y, config)
        _, probs, _ = qnn.forward_batch(X, params)
        assert np.mean((probs >= 0.5) == (y == 1)) >= 0.95

    def test_determinism(self):
        X, y = separable_set(40, seed=1)
        config = small_config(epochs=4)
        params_a, hist_a = qnn.train_qnn(X, y, config)
        params_b, hist_b = qnn.train_qnn(X, y, config)
        np.testing.assert_array_equal(params_a.theta, params_b.theta)
        np.testing.assert_array_equal(params_a.w, params_b.w)
        assert params_a.b == params_b.b
        assert hist_a.train_loss == hist_b.train_loss

    def test_loss_moving_average_non_increasing(self):
        X, y = separable_set()
        config = small_config(epochs=30, learning_rate=0.1, batch_size=16)
        _, history = qnn.train_qnn(X, y, config)
        loss = np.array(history.train_loss)
        ma = np.convolve(loss, np.ones(5) / 5, mode="valid")
        assert np.all(np.diff(ma) <= 1e-12)

    def test_empty_training_set(self):
        with pytest.raises(DataError):
            qnn.train_qnn(np.empty((0, 2)), np.empty(0), small_config())

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            qnn.train_qnn(np.zeros((6, 2)), np.ones(6), small_config())

    def test_zero_readout_start_anchors_initial_loss(self):
        config = small_config()
        params = qnn.init_params(config)
        assert np.all(params.w == 0.0) and params.b == 0.0
        X, y = separable_set(20, seed=2)
        _, probs, _ = qnn.forward_batch(X, params)
        assert qnn.bce_loss(probs, y) == pytest.approx(np.log(2), abs=1e-12)


class TestSerialization:
    def test_bit_exact_round_trip(self, tmp_path):
        X, y = separable_set(30, seed=5)
        config = small_config(epochs=2)
        params, _ = qnn.train_qnn(X, y, config)
        path = tmp_path / "qnn.json"
        qnn.save_qnn(path, params, config)
        loaded, loaded_config = qnn.load_qnn(path)
        np.testing.assert_array_equal(loaded.theta, params.theta)
        np.testing.assert_array_equal(loaded.w, params.w)
        assert loaded.b == params.b
        assert loaded_config == config
        # and the document itself is stable
        qnn.save_qnn(tmp_path / "again.json", loaded, loaded_config)
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()
