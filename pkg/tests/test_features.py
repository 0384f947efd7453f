"""
Tests for correlation features, the streaming accumulator and the standardizer.
"""

import pytest
import numpy as np

import sys
from pathlib import Path

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.features import (
    RECOMPUTE_PERIOD,
    FeatureTable,
    RollingPearson,
    Standardizer,
    WindowConfig,
    extract,
    fit_standardizer,
    load_features,
    load_standardizer,
    pearson,
    realtime_cores,
    save_features,
    save_standardizer,
    sliding_pearson,
)
from core.models import FEATURE_SIGNALS, Dataset, PmuStream
from core.spoofer import spoofer
from core.synth_gen import GenSpec, synth_generator


def random_dataset(n_pmus: int, n_cycles: int, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    return Dataset(tuple(
        PmuStream(pmu_id=f"p{i}", samples=np.abs(rng.normal(1.0, 0.3, size=(n_cycles, 8))))
        for i in range(n_pmus)
    ))


@pytest.fixture(scope="module")
def generated():
    return synth_generator.generate(GenSpec(n_pmus=3, minutes=2, seed=3))


class TestPearson:
    """Direct correlation of two series."""

    @pytest.mark.parametrize("x,y,expected", [
        ([1, 2, 3], [2, 4, 6], 1.0),
        ([1, 2, 3], [3, 2, 1], -1.0),
        ([1, 2, 3], [1, 0, 1], 0.0),
        ([5, 5, 5], [1, 2, 3], 0.0),
    ])
    def test_examples(self, x, y, expected):
        assert pearson(x, y) == pytest.approx(expected, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            pearson([1, 2, 3], [1, 2])

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 2"):
            pearson([1.0], [2.0])

    def test_symmetry_and_affine_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x, y = rng.normal(size=40), rng.normal(size=40)
            r = pearson(x, y)
            assert -1.0 <= r <= 1.0
            assert pearson(y, x) == pytest.approx(r, abs=1e-12)
            assert pearson(3.5 * x + 7.0, y) == pytest.approx(r, abs=1e-12)


ORACLE_CYCLES = 8 * RECOMPUTE_PERIOD + 299


def alternating_scale(n: int, period: int, loud: float, quiet: float) -> np.ndarray:
    return np.where((np.arange(n) // period) % 2 == 0, loud, quiet)


def oracle_series(name: str, seed: int):
    """Seeded (x, y) pairs covering smooth walks, mixed amplitudes and level jumps."""
    rng = np.random.default_rng(seed)
    n = ORACLE_CYCLES
    if name == "walk":
        x = 1000.0 + np.cumsum(rng.normal(size=n)) * 0.01
        y = 0.5 * x + rng.normal(size=n) * 0.001
    elif name == "amplitude_1e3":
        scale = alternating_scale(n, 700, 100.0, 0.1)
        x = 60.0 + rng.normal(size=n) * scale
        y = 60.0 + rng.normal(size=n) * scale + 0.3 * x
    elif name == "amplitude_1e4":
        scale = alternating_scale(n, 1100, 1000.0, 0.1)
        x = 1e4 + rng.normal(size=n) * scale
        y = -5e3 + rng.normal(size=n) * scale - 0.7 * x
    else:
        lengths = rng.integers(200, 2500, size=n // 200)
        levels = np.repeat(rng.choice([-1e3, 0.0, 1e3, 5e3], size=len(lengths)), lengths)[:n]
        x = levels + np.cumsum(rng.normal(size=n)) * 0.05 + rng.normal(size=n)
        y = 0.2 * levels + rng.normal(size=n) + 0.4 * x
    return x, y


class TestSlidingPearson:
    """Windowed correlation against the direct oracle."""

    @pytest.mark.parametrize("name,seed", [
        ("walk", 2),
        ("amplitude_1e3", 21),
        ("amplitude_1e4", 22),
        ("level_jumps", 23),
    ])
    def test_matches_direct_oracle(self, name, seed):
        # 25,000 random windows per series plus every recompute boundary
        x, y = oracle_series(name, seed)
        ends, r = sliding_pearson(x, y, WindowConfig(window_len=300))
        assert len(ends) == ORACLE_CYCLES - 299

        rng = np.random.default_rng(seed + 100)
        picks = rng.choice(len(ends), size=25_000, replace=False)
        boundaries = np.arange(RECOMPUTE_PERIOD, len(ends), RECOMPUTE_PERIOD)
        picks = np.unique(np.concatenate([picks, boundaries - 1, boundaries, boundaries + 1]))

        worst = 0.0
        for k in picks:
            e = ends[k]
            worst = max(worst, abs(r[k] - pearson(x[e - 299:e + 1], y[e - 299:e + 1])))
        assert worst <= 1e-9

    def test_identical_series(self):
        x = np.sin(np.arange(1000) / 30.0)
        _, r = sliding_pearson(x, x, WindowConfig(window_len=300))
        assert np.allclose(r, 1.0, atol=1e-12)

    def test_one_minute_count(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=3600), rng.normal(size=3600)
        ends, r = sliding_pearson(x, y, WindowConfig(window_len=300, step=1))
        assert len(r) == 3301
        assert ends[0] == 299
        assert ends[-1] == 3599

    def test_step(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=1000), rng.normal(size=1000)
        ends, r = sliding_pearson(x, y, WindowConfig(window_len=100, step=10))
        _, dense = sliding_pearson(x, y, WindowConfig(window_len=100))
        assert list(ends[:3]) == [99, 109, 119]
        assert np.array_equal(r, dense[::10])

    def test_flat_windows_are_zero(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=1000)
        x[400:800] = x[399]
        y = rng.normal(size=1000)
        ends, r = sliding_pearson(x, y, WindowConfig(window_len=300))
        flat = (ends - 299 >= 399) & (ends < 800)
        assert np.all(r[flat] == 0.0)
        assert np.any(r[~flat] != 0.0)

    def test_series_shorter_than_window(self):
        with pytest.raises(ValueError, match="series shorter than window"):
            sliding_pearson(np.arange(100.0), np.arange(100.0), WindowConfig(window_len=300))

    def test_window_config_bounds(self):
        with pytest.raises(ValueError):
            WindowConfig(window_len=1)
        with pytest.raises(ValueError):
            WindowConfig(step=0)


class TestRollingPearson:
    """Streaming accumulator."""

    def test_matches_sliding(self):
        rng = np.random.default_rng(6)
        n = RECOMPUTE_PERIOD + 2000
        x = 60.0 + np.cumsum(rng.normal(size=n)) * 0.001
        y = x + rng.normal(size=n) * 0.002
        _, expected = sliding_pearson(x, y, WindowConfig(window_len=300))

        acc = RollingPearson(window_len=300)
        values = [acc.push(a, b) for a, b in zip(x, y)]
        assert all(v is None for v in values[:299])
        assert np.allclose(values[299:], expected, atol=1e-9)
        assert acc.cycle == n - 1

    def test_mixed_amplitude_matches_oracle(self):
        x, y = oracle_series("amplitude_1e4", 31)
        n = RECOMPUTE_PERIOD + 3000
        acc = RollingPearson(window_len=300)
        worst = 0.0
        for k in range(n):
            value = acc.push(x[k], y[k])
            if value is not None and k % 5 == 0:
                worst = max(worst, abs(value - pearson(x[k - 299:k + 1], y[k - 299:k + 1])))
        assert worst <= 1e-9

    def test_not_ready(self):
        acc = RollingPearson(window_len=5)
        acc.push(1.0, 2.0)
        assert not acc.ready
        with pytest.raises(ValueError, match="not yet full"):
            acc.value()

    def test_constant_window(self):
        acc = RollingPearson(window_len=4)
        for k in range(6):
            value = acc.push(3.0, float(k))
        assert value == 0.0

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            RollingPearson(window_len=3).push(float("nan"), 1.0)


class TestExtract:
    """Pairwise feature extraction."""

    def test_single_window(self):
        table = extract(random_dataset(2, 300), WindowConfig(window_len=300))
        assert len(table) == 1
        assert table.row(0).pair == ("p0", "p1")
        assert table.row(0).cycle == 299
        assert not table.row(0).label

    def test_row_layout(self, generated):
        table = extract(generated)
        per_pair = generated.n_cycles - 299
        assert len(table) == 3 * per_pair
        assert list(table.pair_i[::per_pair]) == [0, 0, 1]
        assert list(table.pair_j[::per_pair]) == [1, 2, 2]
        assert np.all(np.diff(table.cycle[:per_pair]) == 1)
        assert table.n_positive == 0

    def test_matches_sliding_pearson(self, generated):
        table = extract(generated, pairs=[(1, 2)])
        for s, kind in enumerate(FEATURE_SIGNALS):
            _, r = sliding_pearson(generated.streams[1].signal(kind), generated.streams[2].signal(kind))
            assert np.allclose(table.r[:, s], r, atol=1e-12)

    def test_worker_invariance(self, generated):
        serial = extract(generated, workers=1)
        parallel = extract(generated, workers=2)
        assert serial.equals(parallel)

    def test_labels_from_truth(self, generated):
        spec = spoofer.default_spec(generated, "pmu02", kind="rlv", minute=1)
        table = extract(spoofer.apply(generated, spec))
        involved = (table.pair_j == 2) & (table.cycle >= spec.onset_t) & (table.cycle < spec.end_t)
        assert np.array_equal(table.label, involved)
        assert table.n_positive == 2 * spec.duration

    def test_spoof_lowers_phase_correlation(self, generated):
        spec = spoofer.default_spec(generated, "pmu01", kind="rlv", minute=1)
        table = extract(spoofer.apply(generated, spec))
        with_target = (table.pair_i == 1) | (table.pair_j == 1)
        spoofed = with_target & (table.cycle >= spec.onset_t + 299) & (table.cycle < spec.end_t)
        before = with_target & (table.cycle < spec.onset_t)
        assert table.r[spoofed, 1].mean() < table.r[before, 1].mean()

    def test_pairs_subset(self, generated):
        table = extract(generated, pairs=[(0, 2)])
        assert set(zip(table.pair_i, table.pair_j)) == {(0, 2)}
        with pytest.raises(ValueError, match="Invalid PMU pair"):
            extract(generated, pairs=[(2, 0)])

    def test_shorter_than_window(self):
        with pytest.raises(ValueError, match="series shorter than window"):
            extract(random_dataset(2, 100))

    def test_rejects_zero_workers(self, generated):
        with pytest.raises(ValueError, match="workers"):
            extract(generated, workers=0)

    def test_csv_round_trip(self, tmp_path):
        table = extract(random_dataset(3, 400, seed=9), WindowConfig(window_len=50))
        path = tmp_path / "features.csv"
        save_features(table, path)
        assert load_features(path).equals(table)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "pmu_i,pmu_j,cycle,r_vp,r_phip,r_f,r_phin,r_phi0,label"

    def test_select_and_minute(self, generated):
        table = extract(generated)
        first_minute = table.select(table.minute_of(3600) == 0)
        assert np.all(first_minute.cycle < 3600)
        assert isinstance(first_minute, FeatureTable)


class TestStandardizer:
    """Feature standardization."""

    def test_two_point_case(self):
        X = np.zeros((2, 5))
        X[:, 0] = [0.0, 2.0]
        X[:, 1:] = [[1, 2, 3, 4], [3, 4, 5, 6]]
        standardizer = fit_standardizer(X)
        assert standardizer.mean[0] == 1.0
        assert standardizer.std[0] == 1.0

    def test_transform_centres_training_rows(self):
        X = np.random.default_rng(7).normal(3.0, 2.0, size=(500, 5))
        standardizer = fit_standardizer(X)
        assert np.all(np.abs(standardizer.transform(X).mean(axis=0)) <= 1e-9)

    def test_constant_column(self):
        X = np.random.default_rng(8).normal(size=(50, 5))
        X[:, 2] = 0.5
        standardizer = fit_standardizer(X)
        assert standardizer.std[2] == 1.0
        assert np.all(standardizer.transform(X)[:, 2] == 0.0)

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            fit_standardizer(np.empty((0, 5)))
        with pytest.raises(ValueError, match="at least 2"):
            fit_standardizer(np.ones((1, 5)))

    def test_file_round_trip(self, tmp_path):
        standardizer = fit_standardizer(np.random.default_rng(9).normal(size=(20, 5)))
        path = tmp_path / "std.json"
        save_standardizer(standardizer, path)
        assert load_standardizer(path).equals(standardizer)

    def test_rejects_non_positive_std(self):
        with pytest.raises(ValueError, match="positive"):
            Standardizer(mean=np.zeros(5), std=np.zeros(5))


class TestRealtimeCores:
    """Core count for real-time correlation."""

    def test_ten_pmu_workload(self):
        assert realtime_cores(1.85, 45 * 5) == 8

    def test_fast_correlation_needs_one_core(self):
        assert realtime_cores(0.01, 10) == 1

    def test_invalid(self):
        with pytest.raises(ValueError):
            realtime_cores(0.0, 10)


if __name__ == "__main__":
    pytest.main([__file__])
