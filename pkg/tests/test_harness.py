"""
Testes do harness de experimentos, do relatório e da configuração.
"""

import json
import math
import statistics

import numpy as np
import pytest
from pydantic import ValidationError

from src.config.defaults import get_default_config
from src.core.finetune import stage2_config
from src.harness.experiment import (
    ALL_METHODS,
    BL_NET,
    BP_NET,
    PE_NET,
    PE_NET_WSP,
    ExperimentConfig,
    run_ablations,
    run_experiment,
    run_seeds,
    run_stage1,
    select_median_stage1,
    theory_baseline,
)
from src.harness.report import (
    BOX_COLUMNS,
    RUN_COLUMNS,
    RunRecord,
    box_stats,
    build_report,
    dumps_report,
    emit_report,
    format_report,
    load_report,
)
from src.nn.training import TrainConfig
from src.oracle.bending import GridConfig
from src.oracle.dataset import GeneratorConfig, SamplingBounds, generate_datasets
from src.utils.config import config_hash, load_config
from src.utils.errors import ArtifactIOError


def _tiny_config(generator, **overrides):
    values = dict(
        generator=generator,
        es_train=TrainConfig(epochs=5),
        sp_train=TrainConfig(epochs=5),
        finetune_train=stage2_config(epochs=3),
        n_runs=2,
        n_theory=20,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture(scope="module")
def tiny_report(small_generator, small_datasets):
    return run_ablations(_tiny_config(small_generator), datasets=small_datasets)


class TestSeeds:
    def test_seeds_are_deterministic_and_distinct(self):
        a, b = run_seeds(0, 3), run_seeds(0, 3)
        assert a == b
        assert a["run"] == 3
        assert len({v for k, v in a.items() if k != "run"}) == len(a) - 1

    def test_controls_share_one_init_stream(self):
        seeds = run_seeds(0, 0)
        assert "control_init" in seeds
        assert "bl_init" not in seeds and "bp_init" not in seeds

    def test_run_seed_is_shared_across_batches(self):
        assert run_seeds(5, 2) == run_seeds(6, 1)
        assert run_seeds(0, 1) != run_seeds(0, 2)


class TestAblations:
    def test_every_method_and_run_is_recorded(self, tiny_report):
        assert tiny_report.methods == ALL_METHODS
        assert [r.run_index for r in tiny_report.runs] == [0, 1]
        for record in tiny_report.runs:
            assert set(record.rmse) == set(ALL_METHODS)
            assert all(v is None or v >= 0 for v in record.rmse.values())
            assert {"sp_rmse", "es_rmse_Do", "es_rmse_T"} <= set(record.stage1)

    def test_medians_follow_run_values(self, tiny_report):
        for method in tiny_report.methods:
            values = tiny_report.values(method)
            if values:
                assert tiny_report.medians[method] == pytest.approx(float(np.median(values)))
                assert tiny_report.box[method]["min"] == min(values)
                assert tiny_report.box[method]["max"] == max(values)
            else:
                assert tiny_report.medians[method] is None

    def test_theory_baseline_is_recorded(self, tiny_report):
        assert tiny_report.theory_rmse is not None and tiny_report.theory_rmse > 0
        assert tiny_report.references["methods"]["PE-NET"] == 0.3922

    def test_provenance(self, tiny_report, small_generator):
        cfg = _tiny_config(small_generator)
        assert tiny_report.provenance["config_hash"] == config_hash(cfg.model_dump(mode="json"))
        assert tiny_report.provenance["n_runs"] == 2

    def test_reruns_are_byte_identical(self, tiny_report, small_generator, small_datasets, tmp_path):
        again = run_ablations(_tiny_config(small_generator), datasets=small_datasets)
        first = emit_report(tiny_report, str(tmp_path / "a"))
        second = emit_report(again, str(tmp_path / "b"))
        for p, q in zip(first, second):
            with open(p, "rb") as f, open(q, "rb") as g:
                assert f.read() == g.read()

    def test_runs_are_independent_of_batch_size(self, tiny_report, small_generator, small_datasets):
        single = run_ablations(
            _tiny_config(small_generator, n_runs=1, methods=[BP_NET]), datasets=small_datasets
        )
        assert single.runs[0].rmse[BP_NET] == tiny_report.runs[0].rmse[BP_NET]
        assert single.medians[BP_NET] == single.runs[0].rmse[BP_NET]

    def test_experiment_runs_only_penet(self, small_generator, small_datasets):
        report = run_experiment(_tiny_config(small_generator, n_runs=1), datasets=small_datasets)
        assert report.kind == "experiment"
        assert report.methods == [PE_NET]
        assert report.untuned_median is not None

    def test_median_stage1_selection(self, small_generator, small_datasets):
        cfg = _tiny_config(small_generator, n_runs=3)
        stage1 = [run_stage1(cfg, small_datasets[0], i) for i in range(3)]
        es, sp = select_median_stage1(stage1)
        es_errors = sorted(s.es_report.rmse_normalized for s in stage1)
        sp_errors = sorted(s.sp_report.test_rmse for s in stage1)
        assert next(s for s in stage1 if s.es is es).es_report.rmse_normalized == es_errors[1]
        assert next(s for s in stage1 if s.sp is sp).sp_report.test_rmse == sp_errors[1]


class TestReport:
    def test_box_stats_match_inclusive_quartiles(self, rng):
        for n in (1, 2, 5, 10, 30):
            values = list(rng.uniform(0, 10, n))
            stats = box_stats(values)
            if n > 1:
                q1, q2, q3 = statistics.quantiles(values, n=4, method="inclusive")
                assert stats["q1"] == pytest.approx(q1, rel=1e-12)
                assert stats["median"] == pytest.approx(q2, rel=1e-12)
                assert stats["q3"] == pytest.approx(q3, rel=1e-12)
            assert stats["min"] == min(values) and stats["max"] == max(values)
        with pytest.raises(ValueError):
            box_stats([])

    def test_diverged_runs_are_excluded(self):
        records = [
            RunRecord(run_index=0, seed=0, rmse={PE_NET: 1.0}),
            RunRecord(run_index=1, seed=1, rmse={PE_NET: None}, errors={PE_NET: "divergiu"}),
            RunRecord(run_index=2, seed=2, rmse={PE_NET: 3.0}),
        ]
        report = build_report("experiment", [PE_NET], records)
        assert report.medians[PE_NET] == 2.0
        assert report.failed_runs == ["1:PE-NET"]
        assert report.any_diverged

    def test_all_diverged_gives_no_median(self):
        report = build_report("experiment", [PE_NET], [RunRecord(0, 0, rmse={PE_NET: None})])
        assert report.medians[PE_NET] is None
        assert PE_NET not in report.box

    def test_empty_methods_write_header_only(self, tmp_path):
        report = build_report("ablation", [], [RunRecord(0, 0)])
        _, runs_path, box_path = emit_report(report, str(tmp_path))
        with open(runs_path, encoding="utf-8") as f:
            assert f.read() == ",".join(RUN_COLUMNS) + "\n"
        with open(box_path, encoding="utf-8") as f:
            assert f.read() == ",".join(BOX_COLUMNS) + "\n"

    def test_json_round_trip(self, tiny_report, tmp_path):
        emit_report(tiny_report, str(tmp_path))
        loaded = load_report(str(tmp_path))
        assert loaded.to_dict() == json.loads(json.dumps(tiny_report.to_dict()))
        assert dumps_report(loaded) == dumps_report(tiny_report)

    def test_missing_report(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_report(str(tmp_path))

    def test_format_lists_methods_and_references(self, tiny_report):
        text = format_report(tiny_report)
        for method in (PE_NET, BL_NET, BP_NET, PE_NET_WSP):
            assert method in text
        assert "6.3572" in text


class TestTheoryBaseline:
    def test_elastic_regime_is_exact(self):
        generator = GeneratorConfig(
            seed=11, n1=4, n2=8, noise_sigma=0.0,
            bounds=SamplingBounds(RB=(20000.0, 40000.0)),
        )
        _, dataset2 = generate_datasets(generator)
        result = theory_baseline(dataset2, generator)
        assert result.n_used == 8
        assert result.failed_indices == []
        assert result.rmse < 1e-3

    def test_plastic_regime_has_error(self, small_generator, small_datasets):
        result = theory_baseline(small_datasets[1], small_generator)
        assert result.n_used == len(small_datasets[1])
        assert math.isfinite(result.rmse) and result.rmse > 0


class TestConfiguration:
    def test_defaults_match_model(self):
        assert ExperimentConfig.model_validate(get_default_config()) == ExperimentConfig()

    def test_file_and_environment_overrides(self, tmp_path, monkeypatch):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"n_runs": 3, "generator": {"n2": 40}}), encoding="utf-8")
        monkeypatch.setenv("RETORNO_MASTER_SEED", "17")
        monkeypatch.delenv("RETORNO_N_RUNS", raising=False)
        cfg = load_config(str(path))
        assert cfg.n_runs == 3
        assert cfg.generator.n2 == 40
        assert cfg.generator.n1 == 600
        assert cfg.master_seed == 17

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{n_runs: ", encoding="utf-8")
        with pytest.raises(ArtifactIOError):
            load_config(str(path))

    def test_invalid_values(self, tmp_path, monkeypatch):
        monkeypatch.delenv("RETORNO_N_RUNS", raising=False)
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"n_runs": 0}), encoding="utf-8")
        with pytest.raises(ValidationError):
            load_config(str(path))
        with pytest.raises(ValidationError):
            ExperimentConfig(methods=["XP-NET"])

    def test_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_small_grid_is_accepted(self):
        assert GeneratorConfig(grid=GridConfig(n_radial=16, n_angular=64)).grid.n_radial == 16
