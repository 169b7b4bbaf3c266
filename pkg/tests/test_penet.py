"""
Testes da PE-NET: peso dinâmico, perda composta, montagem, estágios e persistência.
"""

import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from src.core.composite_loss import (
    CompositeLossConfig,
    Stage2Batch,
    composite_loss_and_grads,
    composite_step,
    dynamic_weight,
)
from src.core.finetune import finetune, stage2_batch, stage2_config
from src.core.pe_net import (
    EsNet,
    PeNet,
    assemble,
    build_esnet,
    load_esnet,
    load_model,
    load_penet,
    load_spnet,
    pe_forward,
    pre_explore_esnet,
    predict,
    pretrain_spnet,
    save_esnet,
    save_penet,
    save_spnet,
    theory_forward,
)
from src.nn.mlp import backward, forward, init_mlp
from src.nn.normalizer import normalizer_from_bounds
from src.nn.optim import AdamState
from src.nn.training import TrainConfig, mse, mse_grad, rmse
from src.oracle.dataset import (
    BMT_SHAPE_FEATURES,
    SINGLE_SHAPE_FEATURES,
    Dataset,
    SamplingBounds,
    split_dataset,
)
from src.utils.errors import DatasetError, SchemaError


def _random_batch(rng, n=6, n_process=4):
    return Stage2Batch(
        shape=rng.uniform(0, 1, (n, 3)),
        process=rng.uniform(0, 1, (n, n_process)),
        label=rng.uniform(0, 1, (n, 1)),
        theory=rng.uniform(0, 1, (n, 2)),
    )


def _composite_value(pe, batch, z):
    implicit = forward(pe.es.mlp, batch.shape)
    pred = forward(pe.sp.mlp, np.hstack([implicit, batch.process]))
    return z * mse(implicit, batch.theory) + (1.0 - z) * mse(pred, batch.label)


def _numeric_grads(params, rebuild, value, eps=1e-6):
    grads = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += eps
            minus[k][idx] -= eps
            g[idx] = (value(rebuild(plus)) - value(rebuild(minus))) / (2 * eps)
        grads.append(g)
    return grads


class TestDynamicWeight:
    def test_zero_deviation(self):
        assert dynamic_weight(np.array([0.3, 0.7]), np.array([0.3, 0.7])) == 0.0

    def test_inside_gate(self):
        cfg = CompositeLossConfig(gate_delta=0.05)
        assert dynamic_weight(np.array([0.0, 0.0]), np.array([0.04, -0.05]), cfg) == 0.0
        assert dynamic_weight(np.array([0.0, 0.0]), np.array([0.04, -0.06]), cfg) > 0.0

    @pytest.mark.parametrize("d", [0.5, 1.0, 2.0])
    def test_uniform_deviation_matches_normal_mass(self, d):
        z = dynamic_weight(np.array([0.2, 0.2]), np.array([0.2 + d, 0.2 - d]))
        expected = norm.cdf(d) - norm.cdf(-d)
        assert z == pytest.approx(expected, rel=1e-12)

    def test_one_sigma_value(self):
        assert dynamic_weight(np.zeros(2), np.ones(2)) == pytest.approx(0.6827, abs=1e-4)

    def test_bounds_and_monotonicity(self):
        values = [dynamic_weight(np.zeros(2), np.full(2, d)) for d in np.linspace(0.0, 8.0, 200)]
        assert all(0.0 <= z <= 1.0 for z in values)
        assert all(a <= b for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(1.0, abs=1e-12)

    def test_strictly_increasing_above_gate(self):
        values = [dynamic_weight(np.zeros(2), np.full(2, d)) for d in (0.1, 0.2, 0.4, 0.8)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_endpoint_symmetry(self, rng):
        for _ in range(20):
            x, f = rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2)
            assert dynamic_weight(x, f) == pytest.approx(dynamic_weight(x, 2 * x - f), abs=1e-12)

    def test_batch_uses_mean_deviation(self):
        x = np.zeros((2, 2))
        f = np.array([[1.0, 1.0], [-3.0, -3.0]])
        assert dynamic_weight(x, f) == pytest.approx(math.erf(2.0 / math.sqrt(2.0)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            dynamic_weight(np.array([np.nan, 0.0]), np.zeros(2))

    def test_negative_gate_rejected(self):
        with pytest.raises(ValueError):
            CompositeLossConfig(gate_delta=-0.1)


class TestCompositeLoss:
    def test_gradients_match_finite_differences(self, small_penet, rng):
        pe = small_penet
        for case in range(20):
            batch = _random_batch(rng, n=int(rng.integers(1, 6)))
            z = float(rng.uniform(0.0, 1.0)) if case % 4 else None
            losses, es_grads, sp_grads = composite_loss_and_grads(pe, batch, pe.loss_config, z=z)
            z = losses.z

            es_numeric = _numeric_grads(
                pe.es.mlp.parameters(),
                lambda p: pe.with_subnets(es=pe.es.with_mlp(pe.es.mlp.with_parameters(p))),
                lambda m: _composite_value(m, batch, z),
            )
            sp_numeric = _numeric_grads(
                pe.sp.mlp.parameters(),
                lambda p: pe.with_subnets(sp=pe.sp.with_mlp(pe.sp.mlp.with_parameters(p))),
                lambda m: _composite_value(m, batch, z),
            )
            for a, n in zip(es_grads.as_list() + sp_grads.as_list(), es_numeric + sp_numeric):
                np.testing.assert_allclose(a, n, rtol=1e-5, atol=1e-9)

    def test_theory_loss_does_not_reach_sp(self, small_penet, rng):
        _, _, sp_grads = composite_loss_and_grads(small_penet, _random_batch(rng), small_penet.loss_config, z=1.0)
        for g in sp_grads.as_list():
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_full_weight_is_theory_regression(self, small_penet, rng):
        batch = _random_batch(rng)
        _, es_grads, _ = composite_loss_and_grads(small_penet, batch, small_penet.loss_config, z=1.0)
        implicit = forward(small_penet.es.mlp, batch.shape)
        expected, _ = backward(small_penet.es.mlp, batch.shape, mse_grad(implicit, batch.theory))
        for a, b in zip(es_grads.as_list(), expected.as_list()):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_gated_step_is_data_only(self, small_penet, rng):
        pe = small_penet
        batch = _random_batch(rng)
        batch = Stage2Batch(batch.shape, batch.process, batch.label, forward(pe.es.mlp, batch.shape))
        losses, es_grads, _ = composite_loss_and_grads(pe, batch, pe.loss_config)
        assert losses.z == 0.0
        _, data_grads, _ = composite_loss_and_grads(pe, batch, pe.loss_config, z=0.0)
        for a, b in zip(es_grads.as_list(), data_grads.as_list()):
            np.testing.assert_array_equal(a, b)

    def test_step_updates_both_subnets(self, small_penet, rng):
        pe = small_penet
        es_state = AdamState.zeros_like(pe.es.mlp.parameters())
        sp_state = AdamState.zeros_like(pe.sp.mlp.parameters())
        new_pe, es_state, sp_state, losses = composite_step(
            pe, _random_batch(rng), pe.loss_config, es_state, sp_state, lr=1e-3
        )
        assert es_state.step == 1 and sp_state.step == 1
        assert not np.array_equal(new_pe.es.mlp.weights[0], pe.es.mlp.weights[0])
        assert not np.array_equal(new_pe.sp.mlp.weights[0], pe.sp.mlp.weights[0])
        assert losses.total == pytest.approx(losses.z * losses.loss_p + (1 - losses.z) * losses.loss_d)

    def test_frozen_sp(self, small_penet, rng):
        pe = small_penet
        cfg = CompositeLossConfig(freeze_sp=True)
        sp_state = AdamState.zeros_like(pe.sp.mlp.parameters())
        new_pe, _, new_sp_state, _ = composite_step(
            pe, _random_batch(rng), cfg, AdamState.zeros_like(pe.es.mlp.parameters()), sp_state, lr=1e-3
        )
        assert new_pe.sp is pe.sp
        assert new_sp_state.step == 0

    def test_empty_batch(self, small_penet):
        empty = Stage2Batch(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 1)), np.zeros((0, 2)))
        with pytest.raises(ValueError):
            composite_step(small_penet, empty, small_penet.loss_config, None, None, lr=1e-3)


class TestAssembly:
    def test_forward_is_composition(self, small_penet, rng):
        shape, process = rng.uniform(0, 1, (5, 3)), rng.uniform(0, 1, (5, 4))
        y, implicit = pe_forward(small_penet, shape, process)
        manual_implicit = forward(small_penet.es.mlp, shape)
        manual = forward(small_penet.sp.mlp, np.hstack([manual_implicit, process]))
        np.testing.assert_array_equal(implicit, manual_implicit)
        np.testing.assert_array_equal(y, manual)

    def test_theory_forward_substitutes_es(self, small_penet, small_datasets):
        raw = small_datasets[1].columns(small_penet.input_schema)
        theory = small_penet.theory_targets(raw[:, :3])
        process = small_penet.sp.process_norm.apply(raw[:, 3:])
        expected = forward(small_penet.sp.mlp, np.hstack([theory, process]))
        np.testing.assert_array_equal(theory_forward(small_penet, raw), expected)

    def test_assemble_rescales_es_output(self, small_penet, small_generator):
        bounds = small_generator.bounds
        other_norm = normalizer_from_bounds(SINGLE_SHAPE_FEATURES, bounds.for_features(SINGLE_SHAPE_FEATURES))
        es = build_esnet(bounds.for_features(BMT_SHAPE_FEATURES), other_norm, seed=8)
        pe = assemble(es, small_penet.sp, small_generator.lambda2)
        shapes = np.array([[15.0, 1.0, 0.3], [28.0, 2.2, 0.7]])
        np.testing.assert_allclose(pe.es.predict_shape(shapes), es.predict_shape(shapes), rtol=1e-12, atol=1e-9)

    def test_mismatched_scales_rejected(self, small_penet, small_generator):
        bounds = small_generator.bounds
        other_norm = normalizer_from_bounds(SINGLE_SHAPE_FEATURES, [(0.0, 1.0), (0.0, 1.0)])
        es = build_esnet(bounds.for_features(BMT_SHAPE_FEATURES), other_norm)
        with pytest.raises(SchemaError):
            PeNet(es=es, sp=small_penet.sp, lambda2=1.0)

    def test_wrong_dimensions_rejected(self, small_penet):
        with pytest.raises(SchemaError):
            EsNet(init_mlp((3, 8, 2)), small_penet.es.input_norm, small_penet.es.output_norm)


class TestStage1:
    def test_pre_explore_learns_identity_for_equal_moduli(self):
        bounds = SamplingBounds().for_features(BMT_SHAPE_FEATURES)
        output_norm = normalizer_from_bounds(SINGLE_SHAPE_FEATURES, bounds[:2])
        es = build_esnet(bounds, output_norm, seed=0)
        trained, report = pre_explore_esnet(es, bounds, 200, 1.0, TrainConfig(epochs=300, seed=0))
        assert report.rmse_normalized < 0.02
        assert report.n_train == 160 and report.n_holdout == 40
        shapes = np.array([[14.0, 1.0, 0.25], [14.0, 1.0, 0.75], [26.0, 2.0, 0.5]])
        predicted = trained.predict_shape(shapes)
        np.testing.assert_allclose(predicted[:, 0], shapes[:, 0], atol=0.5)
        np.testing.assert_allclose(predicted[:, 1], shapes[:, 1], atol=0.1)

    def test_pre_explore_requires_points(self, small_penet, small_generator):
        bounds = small_generator.bounds.for_features(BMT_SHAPE_FEATURES)
        with pytest.raises(DatasetError):
            pre_explore_esnet(small_penet.es, bounds, 0, 1.36, TrainConfig(epochs=1))

    def test_pretrain_without_epochs_keeps_random_net(self, small_penet, small_datasets):
        dataset1 = small_datasets[0]
        sp, report = pretrain_spnet(small_penet.sp, dataset1, TrainConfig(epochs=0), split_seed=0)
        _, test = split_dataset(dataset1, seed=0)
        columns = sp.input_norm.columns
        pred = sp.label_norm.invert(forward(small_penet.sp.mlp, sp.input_norm.apply(test.columns(columns))))
        assert report.test_rmse == pytest.approx(rmse(pred[:, 0], test.labels), rel=1e-12)
        assert report.n_test == 8

    def test_pretrain_reduces_training_loss(self, small_penet, small_datasets):
        _, report = pretrain_spnet(small_penet.sp, small_datasets[0], TrainConfig(epochs=60, seed=1))
        assert report.history[-1] < report.history[0]
        assert np.isfinite(report.test_rmse)

    def test_pretrain_schema_mismatch(self, small_penet, small_datasets):
        with pytest.raises(SchemaError):
            pretrain_spnet(small_penet.sp, Dataset(
                features=small_datasets[0].features[:, :5],
                labels=small_datasets[0].labels,
                schema=small_datasets[0].schema[:5],
            ), TrainConfig(epochs=1))


class TestFinetune:
    def test_zero_epochs_is_untuned(self, small_penet, small_datasets):
        result = finetune(small_penet, small_datasets[1], stage2_config(epochs=0))
        assert result.test_rmse == result.untuned_test_rmse
        assert result.trace == []

    def test_trace_and_determinism(self, small_penet, small_datasets):
        config = stage2_config(epochs=4, seed=2)
        a = finetune(small_penet, small_datasets[1], config, split_seed=1)
        b = finetune(small_penet, small_datasets[1], config, split_seed=1)
        assert a.test_rmse == b.test_rmse
        assert len(a.trace) == 4
        assert all(0.0 <= t.z <= 1.0 for t in a.trace)
        assert all(t.lr == 1e-4 for t in a.trace)

    def test_stage2_batch_shapes(self, small_penet, small_datasets):
        batch = stage2_batch(small_penet, small_datasets[1])
        assert batch.shape.shape == (20, 3)
        assert batch.process.shape == (20, 4)
        assert batch.label.shape == (20, 1)
        assert batch.theory.shape == (20, 2)


class TestPrediction:
    def test_predict_matches_definition(self, small_penet, small_datasets):
        raw = small_datasets[1].columns(small_penet.input_schema)
        result = predict(small_penet, raw)
        shape_norm, process_norm = small_penet.normalize_inputs(raw)
        y, _ = pe_forward(small_penet, shape_norm, process_norm)
        np.testing.assert_array_equal(result.values, small_penet.sp.label_norm.invert(y)[:, 0])

    def test_out_of_range_is_flagged(self, small_penet):
        process_norm = small_penet.sp.process_norm
        process = process_norm.offset + 0.5 * process_norm.scale
        raw = np.array([np.r_[20.0, 1.5, 0.5, process], np.r_[60.0, 1.5, 0.5, process]])
        result = predict(small_penet, raw)
        assert np.all(np.isfinite(result.values))
        assert not result.out_of_range[0]
        assert result.out_of_range[1]
        assert result.any_out_of_range

    def test_missing_feature(self, small_penet):
        frame = pd.DataFrame({"Do": [20.0], "T": [1.5], "Tr": [0.5]})
        with pytest.raises(SchemaError):
            predict(small_penet, frame)

    def test_dataframe_input(self, small_penet, small_datasets):
        frame = small_datasets[1].to_frame()
        a = predict(small_penet, frame).values
        b = predict(small_penet, small_datasets[1]).values
        np.testing.assert_array_equal(a, b)


class TestPersistence:
    def test_penet_round_trip_is_bit_exact(self, small_penet, small_datasets, tmp_path):
        tuned = finetune(small_penet, small_datasets[1], stage2_config(epochs=2)).pe
        path = save_penet(tuned, str(tmp_path / "pe_net.json"))
        loaded = load_penet(path)
        for p, q in zip(loaded.es.mlp.parameters() + loaded.sp.mlp.parameters(),
                        tuned.es.mlp.parameters() + tuned.sp.mlp.parameters()):
            np.testing.assert_array_equal(p, q)
        np.testing.assert_array_equal(
            predict(loaded, small_datasets[1]).values, predict(tuned, small_datasets[1]).values
        )
        assert loaded.loss_config == tuned.loss_config
        assert loaded.lambda2 == tuned.lambda2

    def test_subnet_round_trip(self, small_penet, tmp_path):
        es = load_esnet(save_esnet(small_penet.es, str(tmp_path / "es.json")))
        sp = load_spnet(save_spnet(small_penet.sp, str(tmp_path / "sp.json")))
        np.testing.assert_array_equal(es.mlp.weights[0], small_penet.es.mlp.weights[0])
        np.testing.assert_array_equal(sp.input_norm.scale, small_penet.sp.input_norm.scale)
        assert isinstance(load_model(str(tmp_path / "es.json")), EsNet)

    def test_wrong_kind(self, small_penet, tmp_path):
        path = save_esnet(small_penet.es, str(tmp_path / "es.json"))
        with pytest.raises(SchemaError):
            load_penet(path)
