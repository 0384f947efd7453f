"""
Tests for the seeded synthetic PMU generator.
"""

import json
import pytest
import numpy as np

import sys
from pathlib import Path

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.models import Dataset, PmuStream, SignalKind
from core.synth_gen import (
    DEFAULT_PROFILE,
    PROFILE_PRESETS,
    GenSpec,
    synth_generator,
    zero_noise_profile,
)


@pytest.fixture(scope="module")
def default_dataset():
    """Full-size default recording: 10 PMUs, 14 minutes, seed 42."""
    return synth_generator.generate(GenSpec())


class TestGenSpec:
    """Generation parameters."""

    def test_defaults(self):
        spec = GenSpec()
        assert (spec.n_pmus, spec.minutes, spec.rate_hz, spec.seed) == (10, 14, 60, 42)
        assert spec.total_cycles == 50_400
        assert spec.pmu_ids[0] == "pmu00"
        assert spec.pmu_ids[-1] == "pmu09"

    def test_preset_by_name(self):
        spec = GenSpec.from_dict({"profile": "distribution-like", "minutes": 1})
        assert spec.profile == PROFILE_PRESETS["distribution-like"]

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="Unknown profile preset"):
            GenSpec(profile="offshore")

    def test_rejects_single_pmu(self):
        with pytest.raises(ValueError):
            GenSpec(n_pmus=1)

    def test_default_targets(self):
        targets = {kind: DEFAULT_PROFILE.get(kind).target_rho for kind in SignalKind}
        assert targets[SignalKind.PHI_POS] == 0.99
        assert targets[SignalKind.FREQ] == 0.95
        assert targets[SignalKind.VPOS_MAG] == 0.92
        assert targets[SignalKind.ROCOF] == 0.05

    def test_noise_sigma_from_target(self):
        profile = DEFAULT_PROFILE.get(SignalKind.PHI_NEG)
        rho = profile.base_sigma**2 / (profile.base_sigma**2 + profile.noise_sigma**2)
        assert rho == pytest.approx(profile.target_rho)

    def test_load_spec(self, tmp_path):
        path = tmp_path / "gen.json"
        path.write_text(json.dumps({"n_pmus": 3, "minutes": 2, "seed": 7}), encoding="utf-8")
        spec = synth_generator.load_spec(path)
        assert (spec.n_pmus, spec.minutes, spec.seed) == (3, 2, 7)

    def test_load_spec_bad_json(self, tmp_path):
        path = tmp_path / "gen.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValueError, match="Invalid GenSpec JSON"):
            synth_generator.load_spec(path)


class TestGenerate:
    """Shape, determinism and correlation targets of generated data."""

    def test_shape_and_ids(self):
        dataset = synth_generator.generate(GenSpec(n_pmus=3, minutes=1, seed=1))
        assert dataset.pmu_ids == ["pmu00", "pmu01", "pmu02"]
        assert dataset.n_cycles == 3600
        for stream in dataset.streams:
            assert np.all(np.isfinite(stream.samples))

    def test_same_seed_is_bit_identical(self):
        spec = GenSpec(n_pmus=3, minutes=1, seed=5)
        assert synth_generator.generate(spec) == synth_generator.generate(spec)

    def test_different_seed_differs(self):
        a = synth_generator.generate(GenSpec(n_pmus=3, minutes=1, seed=5))
        b = synth_generator.generate(GenSpec(n_pmus=3, minutes=1, seed=6))
        assert a != b

    def test_zero_noise_gives_identical_streams(self):
        dataset = synth_generator.generate(GenSpec(n_pmus=4, minutes=1, profile=zero_noise_profile()))
        first = dataset.streams[0].samples
        for stream in dataset.streams[1:]:
            assert np.array_equal(stream.samples, first)

    def test_levels_are_nominal(self, default_dataset):
        freq = default_dataset.signal_matrix(SignalKind.FREQ)
        vpos = default_dataset.signal_matrix(SignalKind.VPOS_MAG)
        assert freq.mean() == pytest.approx(60.0, abs=0.01)
        assert vpos.mean() == pytest.approx(1.0, abs=0.01)
        assert np.all(vpos > 0)

    def test_phase_target_is_met(self, default_dataset):
        assert synth_generator.empirical_rho(default_dataset, SignalKind.PHI_POS) == pytest.approx(0.99, abs=0.05)

    def test_rocof_is_poorly_correlated(self, default_dataset):
        assert synth_generator.empirical_rho(default_dataset, SignalKind.ROCOF) < 0.3

    def test_correlation_ordering(self, default_dataset):
        rho = {kind: synth_generator.empirical_rho(default_dataset, kind) for kind in SignalKind}
        assert rho[SignalKind.PHI_POS] > rho[SignalKind.FREQ] > rho[SignalKind.VPOS_MAG]
        assert rho[SignalKind.VPOS_MAG] > rho[SignalKind.PHI_NEG] > rho[SignalKind.VNEG_MAG]
        assert rho[SignalKind.PHI_NEG] > rho[SignalKind.ROCOF]

    def test_rocof_tracks_frequency_steps(self):
        dataset = synth_generator.generate(GenSpec(n_pmus=2, minutes=1, profile=zero_noise_profile()))
        stream = dataset.streams[0]
        freq = stream.signal(SignalKind.FREQ)
        expected = 60 * np.diff(freq, prepend=freq[0])
        assert np.allclose(stream.signal(SignalKind.ROCOF), expected, atol=1e-9)


class TestEmpiricalRho:
    """Measuring correlation of a generated signal."""

    def test_zero_variance_signal(self):
        samples = np.ones((100, 8))
        dataset = Dataset((PmuStream("a", samples), PmuStream("b", samples)))
        with pytest.raises(ValueError, match="zero variance"):
            synth_generator.empirical_rho(dataset, SignalKind.FREQ)

    def test_identical_series(self):
        rng = np.random.default_rng(3)
        samples = np.abs(rng.normal(size=(200, 8)))
        dataset = Dataset((PmuStream("a", samples), PmuStream("b", samples)))
        assert synth_generator.empirical_rho(dataset, SignalKind.PHI_POS) == pytest.approx(1.0)


if __name__ == "__main__":
    pytest.main([__file__])
