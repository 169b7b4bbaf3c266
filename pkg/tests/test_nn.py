"""
Testes da MLP, do Adam, do normalizador, do treinamento e da persistência.
"""

import numpy as np
import pytest

from src.nn.mlp import Mlp, backward, forward, init_mlp
from src.nn.normalizer import Normalizer, fit_normalizer, normalizer_from_bounds
from src.nn.optim import AdamState, adam_step
from src.nn.persistence import load_json, mlp_from_dict, mlp_to_dict, save_json
from src.nn.training import TrainConfig, fit, mse, mse_grad, rmse
from src.utils.errors import ArtifactIOError, DatasetError, SchemaError, TrainingDivergedError


def _numeric_param_grads(mlp, loss_fn, eps=1e-6):
    """Diferenças centrais de loss_fn(mlp) em relação a cada parâmetro."""
    params = mlp.parameters()
    grads = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += eps
            minus[k][idx] -= eps
            g[idx] = (loss_fn(mlp.with_parameters(plus)) - loss_fn(mlp.with_parameters(minus))) / (2 * eps)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-5, atol=1e-8):
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=rtol, atol=atol)


class TestMlp:
    def test_forward_matches_manual(self):
        mlp = init_mlp((3, 4, 2), seed=0)
        x = np.array([0.1, -0.4, 0.7])
        hidden = np.tanh(x @ mlp.weights[0] + mlp.biases[0])
        expected = hidden @ mlp.weights[1] + mlp.biases[1]
        np.testing.assert_allclose(forward(mlp, x), expected, rtol=1e-14)
        np.testing.assert_allclose(forward(mlp, x[None, :])[0], expected, rtol=1e-14)

    def test_glorot_init_is_seeded(self):
        a, b = init_mlp((3, 10, 2), seed=4), init_mlp((3, 10, 2), seed=4)
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p, q)
        limit = np.sqrt(6.0 / 13.0)
        assert np.all(np.abs(a.weights[0]) <= limit)
        assert np.all(a.biases[0] == 0.0)

    @pytest.mark.parametrize("activation", ["tanh", "sigmoid", "relu"])
    def test_parameter_gradients(self, rng, activation):
        for seed in range(5):
            mlp = init_mlp((4, 6, 3), hidden_activation=activation, seed=seed)
            mlp = mlp.with_parameters([p + 0.1 * rng.standard_normal(p.shape) for p in mlp.parameters()])
            x = rng.uniform(-1, 1, (7, 4))
            target = rng.uniform(-1, 1, (7, 3))
            grads, _ = backward(mlp, x, mse_grad(forward(mlp, x), target))
            numeric = _numeric_param_grads(mlp, lambda m: mse(forward(m, x), target))
            assert_grads_close(grads.as_list(), numeric)

    def test_input_gradient(self, rng):
        mlp = init_mlp((3, 10, 2), seed=1)
        x = rng.uniform(-1, 1, 3)
        upstream = np.array([0.3, -1.2])
        _, input_grad = backward(mlp, x, upstream)
        eps = 1e-6
        numeric = np.array([
            (upstream @ forward(mlp, x + eps * e) - upstream @ forward(mlp, x - eps * e)) / (2 * eps)
            for e in np.eye(3)
        ])
        np.testing.assert_allclose(input_grad, numeric, rtol=1e-5, atol=1e-10)

    def test_composed_gradients(self, rng):
        first = init_mlp((3, 10, 2), seed=2)
        second = init_mlp((6, 10, 1), seed=3)
        x = rng.uniform(0, 1, (5, 3))
        process = rng.uniform(0, 1, (5, 4))
        target = rng.uniform(0, 1, (5, 1))

        def loss(a, b):
            return mse(forward(b, np.hstack([forward(a, x), process])), target)

        hidden = forward(first, x)
        joined = np.hstack([hidden, process])
        second_grads, joined_grad = backward(second, joined, mse_grad(forward(second, joined), target))
        first_grads, _ = backward(first, x, joined_grad[:, :2])

        assert_grads_close(first_grads.as_list(), _numeric_param_grads(first, lambda m: loss(m, second)))
        assert_grads_close(second_grads.as_list(), _numeric_param_grads(second, lambda m: loss(first, m)))

    def test_shape_errors(self):
        mlp = init_mlp((3, 10, 2), seed=0)
        with pytest.raises(SchemaError):
            forward(mlp, np.zeros(4))
        with pytest.raises(SchemaError):
            init_mlp((3,))
        with pytest.raises(SchemaError):
            Mlp((2, 1), (np.zeros((3, 1)),), (np.zeros(1),))
        with pytest.raises(ValueError):
            forward(mlp, np.array([np.nan, 0.0, 0.0]))


class TestAdam:
    def test_first_step_moves_by_lr(self):
        params = [np.array([1.0, -2.0, 3.0])]
        grads = [np.array([0.5, -4.0, 1e-3])]
        new, state = adam_step(params, grads, AdamState.zeros_like(params), lr=0.005)
        np.testing.assert_allclose(new[0] - params[0], -0.005 * np.sign(grads[0]), rtol=1e-4)
        assert state.step == 1

    def test_inputs_are_not_modified(self):
        params = [np.ones(2)]
        state = AdamState.zeros_like(params)
        adam_step(params, [np.ones(2)], state, lr=0.1)
        np.testing.assert_array_equal(params[0], np.ones(2))
        assert state.step == 0

    def test_non_finite_gradient(self):
        params = [np.ones(2)]
        with pytest.raises(TrainingDivergedError):
            adam_step(params, [np.array([np.inf, 0.0])], AdamState.zeros_like(params), lr=0.1)


class TestNormalizer:
    def test_minmax_maps_training_range(self, rng):
        data = rng.uniform(-5, 5, (50, 3))
        norm = fit_normalizer(data, ["a", "b", "c"])
        scaled = norm.apply(data)
        np.testing.assert_allclose(scaled.min(axis=0), 0.0, atol=1e-15)
        np.testing.assert_allclose(scaled.max(axis=0), 1.0, atol=1e-15)
        np.testing.assert_allclose(norm.invert(scaled), data, rtol=1e-13, atol=1e-13)
        assert not norm.out_of_range(data).any()
        assert norm.out_of_range(data.max(axis=0) + 1.0).all()

    def test_standard_mode(self, rng):
        data = rng.normal(3.0, 2.0, (200, 2))
        scaled = fit_normalizer(data, ["a", "b"], mode="standard").apply(data)
        np.testing.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(scaled.std(axis=0), 1.0, rtol=1e-12)

    def test_select_and_concat(self):
        norm = normalizer_from_bounds(["a", "b", "c"], [(0, 1), (0, 2), (0, 4)])
        picked = norm.select(["c", "a"])
        np.testing.assert_array_equal(picked.scale, [4.0, 1.0])
        joined = picked.concat(norm.select(["b"]))
        assert joined.columns == ["c", "a", "b"]
        with pytest.raises(SchemaError):
            norm.select(["z"])

    def test_dict_round_trip(self):
        norm = fit_normalizer(np.array([[1.0, 5.0], [3.0, 9.0]]), ["a", "b"])
        again = Normalizer.from_dict(norm.to_dict())
        np.testing.assert_array_equal(again.offset, norm.offset)
        np.testing.assert_array_equal(again.scale, norm.scale)

    def test_constant_column(self):
        with pytest.raises(SchemaError, match="b"):
            fit_normalizer(np.array([[1.0, 2.0], [3.0, 2.0]]), ["a", "b"])
        with pytest.raises(SchemaError):
            normalizer_from_bounds(["a"], [(1.0, 1.0)])


class TestTraining:
    def test_mse_and_rmse(self):
        assert mse(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 2.0
        assert rmse(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(np.sqrt(12.5))
        with pytest.raises(SchemaError):
            mse(np.zeros(2), np.zeros(3))
        with pytest.raises(DatasetError):
            mse(np.zeros(0), np.zeros(0))

    def test_learning_rate_schedule(self):
        config = TrainConfig(initial_lr=0.005, lr_decay_factor=0.9, lr_drop_period_epochs=20)
        assert config.learning_rate(0) == 0.005
        assert config.learning_rate(19) == 0.005
        assert config.learning_rate(20) == pytest.approx(0.0045)
        assert config.learning_rate(45) == pytest.approx(0.005 * 0.81)

    def test_fit_reduces_loss(self, rng):
        X = rng.uniform(0, 1, (60, 2))
        Y = (0.5 * X[:, 0] - 0.3 * X[:, 1] + 0.2)[:, None]
        mlp = init_mlp((2, 10, 1), seed=0)
        result = fit(mlp, X, Y, TrainConfig(epochs=100, minibatch_size=5, initial_lr=0.01, seed=0))
        assert len(result.history) == 100
        assert result.history[-1] < 0.1 * mse(forward(mlp, X), Y)

    def test_zero_epochs_returns_same_network(self, rng):
        mlp = init_mlp((2, 10, 1), seed=0)
        result = fit(mlp, rng.uniform(0, 1, (10, 2)), rng.uniform(0, 1, 10), TrainConfig(epochs=0))
        for p, q in zip(result.mlp.parameters(), mlp.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_fit_is_deterministic(self, rng):
        X, Y = rng.uniform(0, 1, (20, 2)), rng.uniform(0, 1, (20, 1))
        config = TrainConfig(epochs=5, seed=9)
        a = fit(init_mlp((2, 10, 1), seed=0), X, Y, config)
        b = fit(init_mlp((2, 10, 1), seed=0), X, Y, config)
        for p, q in zip(a.mlp.parameters(), b.mlp.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_divergence_reports_epoch(self):
        X = np.array([[1e200, 1e200]] * 4)
        with pytest.raises(TrainingDivergedError) as info:
            fit(init_mlp((2, 10, 1), seed=0), X, np.array([1e300] * 4), TrainConfig(epochs=3))
        assert info.value.epoch == 0

    def test_empty_data(self):
        with pytest.raises(DatasetError):
            fit(init_mlp((2, 10, 1), seed=0), np.zeros((0, 2)), np.zeros(0), TrainConfig())


class TestPersistence:
    def test_bit_exact_round_trip(self, tmp_path, rng):
        mlp = init_mlp((3, 10, 2), seed=0)
        mlp = mlp.with_parameters([p + rng.standard_normal(p.shape) / 3.0 for p in mlp.parameters()])
        path = save_json({"mlp": mlp_to_dict(mlp)}, str(tmp_path / "m" / "model.json"))
        loaded = mlp_from_dict(load_json(path)["mlp"])
        for p, q in zip(loaded.parameters(), mlp.parameters()):
            np.testing.assert_array_equal(p, q)
        x = rng.uniform(0, 1, (4, 3))
        np.testing.assert_array_equal(forward(loaded, x), forward(mlp, x))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_json(str(tmp_path / "missing.json"))

    def test_incomplete_document(self):
        with pytest.raises(SchemaError):
            mlp_from_dict({"weights": []})
