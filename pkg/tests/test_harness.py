"""
Tests for the experiment harness on a scaled-down protocol.
"""

import json
import pytest
import numpy as np
from unittest.mock import patch

import sys
from pathlib import Path

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config.settings import settings
from core.features import fit_standardizer
from core.harness import (
    ExperimentSpec,
    ExperimentStageError,
    dataset_fingerprint,
    experiment_harness,
)
from core.synth_gen import GenSpec, synth_generator


# 3 PMUs at 10 Hz: 600 cycles per minute, 4 minutes split 3/1
SMALL_SPEC = {
    "seed": 7,
    "n_minutes": 4,
    "train_minutes": 3,
    "test_minutes": 1,
    "gen": {"n_pmus": 3, "rate_hz": 10},
    "spoof_kind": "rlv",
    "window": {"window_len": 60, "step": 1},
    "models": ["svm", "mlp"],
    "train_cfg": {"svm_subsample_cap": 600, "mlp_subsample_cap": 2000, "epochs": 5, "batch_size": 128},
}


def small_spec(**overrides) -> ExperimentSpec:
    return ExperimentSpec.from_dict({**SMALL_SPEC, **overrides})


@pytest.fixture(scope="module")
def report():
    return experiment_harness.run(small_spec())


class TestExperimentSpec:
    """Experiment definition and validation."""

    def test_defaults_follow_protocol(self):
        spec = ExperimentSpec()
        assert (spec.n_minutes, spec.train_minutes, spec.test_minutes) == (14, 11, 3)
        assert spec.window.window_len == 300
        assert spec.models == ("svm", "mlp")
        assert spec.train_cfg.c_param == 1.0 and spec.train_cfg.gamma == 0.2

    def test_gen_spec_takes_minutes_and_seed(self):
        spec = small_spec()
        assert spec.gen_spec.minutes == 4
        assert spec.gen_spec.seed == 7

    def test_split_must_add_up(self):
        with pytest.raises(ValueError, match="must equal n_minutes"):
            small_spec(train_minutes=2)

    def test_window_must_fit_half_minute(self):
        with pytest.raises(ValueError, match="window_len"):
            small_spec(window={"window_len": 301})

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            small_spec(models=["forest"])

    def test_spoof_kind_by_name_and_object(self):
        assert small_spec(spoof_kind="mirror").spoof_kind.kind == "mirror"
        assert small_spec(spoof_kind={"kind": "dilation", "factor": 3.0}).spoof_kind.factor == 3.0

    def test_default_config_file(self):
        spec = experiment_harness.load_spec(settings.DEFAULT_EXPERIMENT_FILE)
        assert spec == ExperimentSpec()

    def test_load_spec_bad_json(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text("[", encoding="utf-8")
        with pytest.raises(ValueError, match="Invalid experiment JSON"):
            experiment_harness.load_spec(path)


class TestRun:
    """End-to-end run on the small protocol."""

    def test_row_counts(self, report):
        per_minute = 600 - 60 + 1
        counts = report.row_counts
        assert counts["extracted"] == 3 * 4 * per_minute
        assert counts["train"] == 3 * 3 * per_minute
        assert counts["test"] == 3 * per_minute
        assert counts["train"] + counts["test"] == counts["extracted"]
        # Two pairs contain each minute's target, spoofed for the last 300 cycles
        assert counts["train_spoofed"] == 3 * 2 * 300
        assert counts["test_spoofed"] == 2 * 300

    def test_every_minute_has_a_target(self, report):
        assert sorted(report.targets) == [0, 1, 2, 3]
        assert set(report.targets.values()) <= {"pmu00", "pmu01", "pmu02"}
        assert report.train_minutes == [0, 1, 2]
        assert report.test_minutes == [3]

    def test_standardizer_fitted_on_train_rows_only(self, report):
        train_rows = report.artifacts["train_rows"]
        test_rows = report.artifacts["test_rows"]
        assert report.standardizer.equals(fit_standardizer(train_rows))
        everything = fit_standardizer(np.vstack([train_rows.r, test_rows.r]))
        assert not report.standardizer.equals(everything)

    def test_train_and_test_rows_are_disjoint_minutes(self, report):
        train_rows = report.artifacts["train_rows"]
        test_rows = report.artifacts["test_rows"]
        assert train_rows.cycle.max() < 3 * 600
        assert test_rows.cycle.min() >= 3 * 600

    def test_results_for_both_models(self, report):
        assert set(report.results) == {"svm", "mlp"}
        for result in report.results.values():
            assert result.confusion.total == report.row_counts["test"]
            assert 0.0 <= result.ratios.accuracy <= 100.0
            assert {entry.minute for entry in result.latency.entries} == {3}

    def test_rlv_is_detected(self, report):
        assert report.results["svm"].ratios.f1 >= 0.7
        assert report.results["svm"].ratios.specificity >= 90.0

    def test_rlv_respects_constraints(self, report):
        assert report.constraint_violations == 0

    def test_same_seed_same_report(self, report):
        again = experiment_harness.run(small_spec())
        assert again.to_dict() == report.to_dict()

    def test_worker_count_does_not_change_report(self, report):
        parallel = experiment_harness.run(small_spec(), workers=2)
        assert parallel.to_dict() == report.to_dict()

    def test_fingerprint_matches_spoofed_data(self, report):
        assert report.dataset_fingerprint == dataset_fingerprint(report.artifacts["spoofed"].data)
        clean = synth_generator.generate(GenSpec(n_pmus=3, rate_hz=10, minutes=4, seed=7))
        assert dataset_fingerprint(clean) != report.dataset_fingerprint

    def test_random_split(self):
        spec = small_spec(split="random", models=["svm"])
        train, test = experiment_harness._split_minutes(spec)
        assert len(test) == 1
        assert sorted(train + test) == [0, 1, 2, 3]
        assert experiment_harness._split_minutes(spec) == (train, test)

    @pytest.mark.parametrize("kind", ["mirror", "dilation"])
    def test_other_spoof_kinds_run(self, kind):
        result = experiment_harness.run(small_spec(spoof_kind=kind, models=["svm"]))
        assert result.config["spoof_kind"]["kind"] == kind
        assert result.row_counts["test_spoofed"] == 600


class TestStageErrors:
    """Failures are reported with the stage that raised them."""

    def test_feature_stage(self):
        with patch("core.harness.extract", side_effect=ValueError("bad window")):
            with pytest.raises(ExperimentStageError) as excinfo:
                experiment_harness.run(small_spec())
        assert excinfo.value.stage == "features"
        assert isinstance(excinfo.value.cause, ValueError)

    def test_training_stage(self):
        with patch("core.harness.train_svm", side_effect=RuntimeError("solver crashed")):
            with pytest.raises(ExperimentStageError) as excinfo:
                experiment_harness.run(small_spec(models=["svm"]))
        assert excinfo.value.stage == "train_svm"
        assert "solver crashed" in str(excinfo.value)


class TestOutputs:
    """Report files and grid search."""

    def test_write_report(self, report, tmp_path):
        paths = experiment_harness.write_report(report, tmp_path / "out")
        assert all(path.exists() for path in paths.values())

        document = json.loads(paths["report.json"].read_text(encoding="utf-8"))
        assert document["format_version"] == 1
        assert "timings" not in document
        assert document["models"]["svm"]["confusion"]["tp"] >= 0
        assert document["subsample_caps"] == {"svm": 600, "mlp": 2000}

        timings = json.loads(paths["timings.json"].read_text(encoding="utf-8"))
        assert {"generate", "spoof", "features", "split", "train_svm", "evaluate_mlp"} <= set(timings)

        text = paths["report.txt"].read_text(encoding="utf-8")
        assert "Accuracy" in text
        assert "SVM (rlv)" in text

    def test_grid_search_single_cell(self):
        result = experiment_harness.run_grid_search(small_spec(models=["svm"]), [1.0], [0.2])
        assert (result.c_param, result.gamma) == (1.0, 0.2)
        assert 0.0 <= result.best_f1 <= 1.0


if __name__ == "__main__":
    pytest.main([__file__])
