"""
Tests for confusion ratios, detection latency and report tables.
"""

import pytest
import numpy as np

import sys
from pathlib import Path

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.features import FeatureTable
from core.metrics import (
    Confusion,
    aggregate_latency,
    confusion,
    format_report_table,
    latency,
    latency_for_pairs,
    ratios,
)
from core.models import SpoofSpec


class TestConfusion:
    """Confusion counts."""

    def test_hand_count(self):
        truth = [True] * 6 + [False] * 4
        pred = [True] * 5 + [False] + [True] + [False] * 3
        assert confusion(pred, truth) == Confusion(tp=5, fp=1, tn=3, fn=1)

    def test_all_correct(self):
        truth = [True, False, True, False]
        c = confusion(truth, truth)
        assert c.fp == 0 and c.fn == 0

    def test_all_normal(self):
        assert confusion([False] * 7, [False] * 7) == Confusion(tp=0, fp=0, tn=7, fn=0)

    def test_errors(self):
        with pytest.raises(ValueError, match="differ in length"):
            confusion([True], [True, False])
        with pytest.raises(ValueError, match="at least one row"):
            confusion([], [])
        with pytest.raises(ValueError):
            Confusion(tp=-1, fp=0, tn=0, fn=0)


class TestRatios:
    """The six detection metrics."""

    def test_hand_example(self):
        r = ratios(Confusion(tp=5, fp=1, tn=3, fn=1))
        assert r.accuracy == pytest.approx(80.0)
        assert r.sensitivity == pytest.approx(83.3333, abs=1e-3)
        assert r.precision == pytest.approx(83.3333, abs=1e-3)
        assert r.specificity == pytest.approx(75.0)
        assert r.f1 == pytest.approx(0.8333, abs=1e-4)
        assert r.fdr == pytest.approx(16.6667, abs=1e-3)

    def test_harmonic_mean(self):
        r = ratios(Confusion(tp=5, fp=0, tn=10, fn=5))
        assert r.sensitivity == 50.0
        assert r.precision == 100.0
        assert r.f1 == pytest.approx(2 * 0.5 / 1.5)

    def test_no_detections(self):
        r = ratios(Confusion(tp=0, fp=0, tn=10, fn=3))
        assert r.precision == 100.0
        assert r.fdr == 0.0
        assert r.no_detections
        assert r.f1 == 0.0

    def test_no_positives(self):
        r = ratios(Confusion(tp=0, fp=2, tn=8, fn=0))
        assert r.sensitivity is None
        assert r.f1 is None
        assert r.no_positives

    def test_no_negatives(self):
        r = ratios(Confusion(tp=4, fp=0, tn=0, fn=1))
        assert r.specificity is None
        assert r.no_negatives
        assert r.to_dict()["flags"]["no_negatives"]

    def test_identities_on_random_confusions(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            tp, fp, tn, fn = (int(v) for v in rng.integers(1, 500, size=4))
            r = ratios(Confusion(tp, fp, tn, fn))
            assert r.fdr + r.precision == pytest.approx(100.0, abs=1e-12)
            assert r.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)

    def test_swapping_positive_class(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            truth = rng.random(50) < 0.3
            pred = rng.random(50) < 0.4
            c = confusion(pred, truth)
            swapped = confusion(~pred, ~truth)
            assert swapped == c.swap_classes()
            a, b = ratios(c), ratios(swapped)
            assert a.accuracy == pytest.approx(b.accuracy)
            assert a.sensitivity == pytest.approx(b.specificity)
            assert a.specificity == pytest.approx(b.sensitivity)


class TestLatency:
    """Cycles to the first run of positives."""

    def test_detected_at_onset(self):
        assert latency([True] * 60, onset_t=0) == 0

    def test_delayed_detection(self):
        pred = [False] * 10 + [True] * 40
        assert latency(pred, onset_t=0) == 10

    def test_alternating_is_never(self):
        assert latency([True, False] * 100, onset_t=0) is None

    def test_first_cycle_offset(self):
        pred = [False] * 5 + [True] * 35
        assert latency(pred, onset_t=100, first_cycle=100) == 5

    def test_run_must_finish_inside_spoof(self):
        pred = [False] * 20 + [True] * 40
        assert latency(pred, onset_t=0, duration=40) is None
        assert latency(pred, onset_t=0, duration=50) == 20

    def test_custom_run_len(self):
        assert latency([False, True, True, False, True, True, True], onset_t=0, run_len=3) == 4

    def test_onset_outside_range(self):
        with pytest.raises(ValueError, match="outside prediction range"):
            latency([True] * 10, onset_t=10)

    def test_monotone_under_flips(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pred = rng.random(120) < 0.8
            before = latency(pred, onset_t=0)
            flipped = pred.copy()
            negatives = np.flatnonzero(~pred)
            if len(negatives):
                flipped[rng.choice(negatives)] = True
            after = latency(flipped, onset_t=0)
            if before is not None:
                assert after is not None and after <= before


class TestAggregateLatency:
    """Min, max and min-of-max across pairs and minutes."""

    def test_single_minute(self):
        report = aggregate_latency({0: {("a", "b"): 5, ("a", "c"): 20, ("b", "c"): 8}})
        assert (report.min_latency, report.max_latency, report.min_of_max) == (5, 20, 20)

    def test_two_minutes(self):
        report = aggregate_latency({
            1: {("a", "b"): 3, ("a", "c"): 20},
            2: {("a", "b"): 12, ("a", "c"): 7},
        })
        assert report.min_of_max == 12
        assert report.per_minute_max == {1: 20, 2: 12}

    def test_never_propagates(self):
        report = aggregate_latency({
            0: {("a", "b"): None, ("a", "c"): 4},
            1: {("a", "b"): None, ("a", "c"): 2},
        })
        assert report.min_latency == 2
        assert report.max_latency is None
        assert report.min_of_max is None
        document = report.to_dict()
        assert document["max"] == "never"
        assert document["entries"][0]["latency"] == "never"

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_latency({})
        with pytest.raises(ValueError):
            aggregate_latency({0: {}})


class TestLatencyForPairs:
    """Latency per spoofed pair from table predictions."""

    def test_groups_by_minute(self):
        n = 100
        pair_i = np.repeat([0, 0, 1], n)
        pair_j = np.repeat([1, 2, 2], n)
        cycle = np.tile(np.arange(n), 3)
        table = FeatureTable(["a", "b", "c"], pair_i, pair_j, cycle, np.zeros((3 * n, 5)), np.zeros(3 * n, bool))

        spec = SpoofSpec.from_dict({"target_pmu": "b", "kind": "rlv", "onset_t": 40, "duration": 60})
        predictions = np.zeros(3 * n, dtype=bool)
        predictions[(pair_i == 0) & (pair_j == 1) & (cycle >= 45)] = True
        predictions[(pair_i == 1) & (cycle >= 40) & (cycle < 60)] = True

        result = latency_for_pairs(table, predictions, [spec], cycles_per_minute=60, run_len=30)
        assert result == {0: {("a", "b"): 5, ("b", "c"): None}}

    def test_prediction_count_mismatch(self):
        table = FeatureTable(["a", "b"], [0], [1], [0], np.zeros((1, 5)), [False])
        with pytest.raises(ValueError, match="predictions"):
            latency_for_pairs(table, np.zeros(2, bool), [], cycles_per_minute=60)


class TestReportTable:
    """Plain-text tables."""

    def test_row_order_and_values(self):
        columns = {"SVM": ratios(Confusion(5, 1, 3, 1)), "MLP": ratios(Confusion(6, 0, 4, 0))}
        latencies = {"SVM": aggregate_latency({0: {("a", "b"): 3}}), "MLP": aggregate_latency({0: {("a", "b"): None}})}
        text = format_report_table(columns, latencies)

        positions = [text.index(label) for label in ("Accuracy", "Sensitivity", "Precision", "Specificity", "F1", "FDR")]
        assert positions == sorted(positions)
        assert "80.00%" in text
        assert "0.8333" in text
        assert "never" in text
        assert "Min of max" in text

    def test_not_applicable_cell(self):
        text = format_report_table({"Normal only": ratios(Confusion(0, 1, 9, 0))})
        assert "n/a" in text


if __name__ == "__main__":
    pytest.main([__file__])
