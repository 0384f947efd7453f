"""
Synthetic Generator - Seeded multi-PMU recordings with controlled inter-PMU correlation.

Every signal of every PMU is a nominal level plus a shared common-mode walk plus a
per-PMU walk. Both walks are Gaussian noise passed through a first-order low-pass
filter, so a 300-cycle window sees slow structure rather than white noise. The ratio
of shared to per-PMU deviation sets the pairwise correlation of the signal.

Random numbers come from numpy's PCG64 bit generator seeded with GenSpec.seed, drawn
in a fixed order (signals in SignalKind order, each drawing the shared walk and one
walk per PMU together; ROCOF measurement noise last), so a GenSpec always yields the
same recording.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.features import pearson
from core.models import SECONDS_PER_MINUTE, Dataset, PmuStream, SignalKind, pair_indices

logger = logging.getLogger(__name__)

DEFAULT_POLE = 0.999
VARIANCE_FLOOR = 1e-24


class SignalProfile(BaseModel):
    """Correlation target and scales for one signal."""

    model_config = ConfigDict(frozen=True)

    target_rho: float = Field(gt=0.0, le=1.0)
    base_level: float
    base_sigma: float = Field(ge=0.0)

    @property
    def noise_sigma(self) -> float:
        """Per-PMU deviation giving target_rho = base^2 / (base^2 + noise^2)."""
        return self.base_sigma * float(np.sqrt(1.0 / self.target_rho - 1.0))

    def to_dict(self) -> Dict[str, Any]:
        return {**self.model_dump(), "noise_sigma": self.noise_sigma}


class CorrelationProfile(BaseModel):
    """
    Per-signal correlation targets.

    For ROCOF only target_rho and base_level are used: the series is derived from
    the frequency series, and target_rho sets the added measurement noise.
    """

    model_config = ConfigDict(frozen=True)

    vp_mag: SignalProfile
    vn_mag: SignalProfile
    v0_mag: SignalProfile
    phi_p: SignalProfile
    phi_n: SignalProfile
    phi_0: SignalProfile
    freq: SignalProfile
    rocof: SignalProfile

    def get(self, kind: SignalKind) -> SignalProfile:
        return getattr(self, kind.value)

    def with_target(self, kind: SignalKind, target_rho: float) -> 'CorrelationProfile':
        """Copy of the profile with one signal's target changed."""
        updated = self.get(kind).model_copy(update={"target_rho": target_rho})
        return self.model_copy(update={kind.value: updated})

    def to_dict(self) -> Dict[str, Any]:
        return {kind.value: self.get(kind).to_dict() for kind in SignalKind}


def _profile(targets: Dict[str, float]) -> CorrelationProfile:
    scales = {
        "vp_mag": (1.0, 0.01),
        "vn_mag": (0.05, 0.002),
        "v0_mag": (0.05, 0.002),
        "phi_p": (0.0, 0.05),
        "phi_n": (0.0, 0.1),
        "phi_0": (0.0, 0.1),
        "freq": (60.0, 0.01),
        "rocof": (0.0, 0.01),
    }
    return CorrelationProfile(**{
        name: SignalProfile(target_rho=targets[name], base_level=level, base_sigma=sigma)
        for name, (level, sigma) in scales.items()
    })


PROFILE_PRESETS: Dict[str, CorrelationProfile] = {
    "transmission-like": _profile({
        "vp_mag": 0.92, "vn_mag": 0.2, "v0_mag": 0.2, "phi_p": 0.99,
        "phi_n": 0.55, "phi_0": 0.55, "freq": 0.95, "rocof": 0.05,
    }),
    "distribution-like": _profile({
        "vp_mag": 0.8, "vn_mag": 0.1, "v0_mag": 0.1, "phi_p": 0.95,
        "phi_n": 0.4, "phi_0": 0.4, "freq": 0.9, "rocof": 0.02,
    }),
}

DEFAULT_PROFILE = PROFILE_PRESETS["transmission-like"]


def zero_noise_profile(base: CorrelationProfile = DEFAULT_PROFILE) -> CorrelationProfile:
    """Profile with every target set to 1: all PMUs report identical signals."""
    profile = base
    for kind in SignalKind:
        profile = profile.with_target(kind, 1.0)
    return profile


class GenSpec(BaseModel):
    """Parameters of one synthetic recording."""

    model_config = ConfigDict(frozen=True)

    n_pmus: int = Field(default=10, ge=2)
    minutes: int = Field(default=14, ge=1)
    rate_hz: int = Field(default=60, ge=1)
    seed: int = Field(default=42, ge=0, lt=2**64)
    profile: CorrelationProfile = DEFAULT_PROFILE
    pole: float = Field(default=DEFAULT_POLE, gt=0.0, lt=1.0)

    @field_validator("profile", mode="before")
    @classmethod
    def _resolve_preset(cls, value: Any) -> Any:
        if isinstance(value, str):
            if value not in PROFILE_PRESETS:
                raise ValueError(f"Unknown profile preset: {value}. Expected one of {', '.join(PROFILE_PRESETS)}")
            return PROFILE_PRESETS[value]
        return value

    @property
    def total_cycles(self) -> int:
        return self.minutes * SECONDS_PER_MINUTE * self.rate_hz

    @property
    def pmu_ids(self) -> list:
        width = max(2, len(str(self.n_pmus - 1)))
        return [f"pmu{i:0{width}d}" for i in range(self.n_pmus)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GenSpec':
        return cls.model_validate(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_pmus": self.n_pmus,
            "minutes": self.minutes,
            "rate_hz": self.rate_hz,
            "seed": self.seed,
            "pole": self.pole,
            "profile": self.profile.to_dict(),
        }


class SyntheticGenerator:
    """Generates deterministic multi-PMU recordings and checks their correlation."""

    def generate(self, spec: GenSpec) -> Dataset:
        """
        Generate a recording from a GenSpec.

        Args:
            spec: Generation parameters, including the seed

        Returns:
            Dataset with spec.n_pmus streams of spec.total_cycles cycles
        """
        try:
            n, p = spec.total_cycles, spec.n_pmus
            rng = np.random.Generator(np.random.PCG64(spec.seed))
            logger.info(f"Generating {p} PMUs x {n} cycles (seed {spec.seed})")

            values = np.empty((p, n, len(SignalKind)))
            for kind in SignalKind:
                if kind is SignalKind.ROCOF:
                    continue
                profile = spec.profile.get(kind)
                unit = self._decorrelate(self._smoothed_walk(rng, n, p + 1, spec.pole))
                shared = unit[0] * profile.base_sigma
                own = unit[1:] * profile.noise_sigma
                values[:, :, kind.index] = profile.base_level + shared + own

            values[:, :, SignalKind.ROCOF.index] = self._rocof(rng, values[:, :, SignalKind.FREQ.index], spec)

            streams = tuple(
                PmuStream(pmu_id=pmu_id, samples=values[i], rate_hz=spec.rate_hz)
                for i, pmu_id in enumerate(spec.pmu_ids)
            )
            return Dataset(streams)

        except Exception as e:
            logger.error(f"Error generating synthetic dataset: {e}")
            raise

    def _smoothed_walk(self, rng: np.random.Generator, n: int, rows: int, pole: float) -> np.ndarray:
        """
        Unit-variance AR(1) series w(k) = pole*w(k-1) + sqrt(1-pole^2)*z(k), one per row.

        Uses the exponential filter y(k) = pole*y(k-1) + (1-pole)*x(k) with y(0) = x(0).
        """
        z = rng.standard_normal((n, rows))
        drive = z * (np.sqrt(1.0 - pole**2) / (1.0 - pole))
        drive[0] = z[0]
        walk = pd.DataFrame(drive).ewm(alpha=1.0 - pole, adjust=False).mean().to_numpy()
        return walk.T

    def _decorrelate(self, walks: np.ndarray) -> np.ndarray:
        """
        Zero-mean, unit-deviation rows that are mutually uncorrelated over the recording.

        Row k keeps the part of walk k not explained by rows 0..k-1 (QR of the centered
        walks), so the shared row stays a pure walk and pairwise correlations hit their
        targets exactly instead of up to the sampling error of slow walks.
        """
        rows, n = walks.shape
        if rows > n:
            return self._normalize(walks, 1.0)
        centered = walks - walks.mean(axis=1, keepdims=True)
        q, r = np.linalg.qr(centered.T)
        signs = np.where(np.diag(r) < 0, -1.0, 1.0)
        return (q * signs).T * np.sqrt(n)

    def _normalize(self, series: np.ndarray, sigma: float) -> np.ndarray:
        """Rescale each row to zero mean and deviation exactly sigma."""
        centered = series - series.mean(axis=1, keepdims=True)
        std = centered.std(axis=1, keepdims=True)
        if sigma == 0.0:
            return np.zeros_like(centered)
        return centered / np.where(std > 0, std, 1.0) * sigma

    def _rocof(self, rng: np.random.Generator, freq: np.ndarray, spec: GenSpec) -> np.ndarray:
        """ROCOF as rate_hz times the frequency step, plus per-PMU white measurement noise."""
        derivative = spec.rate_hz * np.diff(freq, axis=1, prepend=freq[:, :1])

        freq_profile = spec.profile.get(SignalKind.FREQ)
        rocof_profile = spec.profile.get(SignalKind.ROCOF)
        # Step variance of a unit AR(1) walk is 2*(1-pole)
        step_scale = spec.rate_hz**2 * 2.0 * (1.0 - spec.pole)
        shared_var = step_scale * freq_profile.base_sigma**2
        own_var = step_scale * freq_profile.noise_sigma**2
        noise_var = max(0.0, shared_var / rocof_profile.target_rho - shared_var - own_var)

        noise = self._normalize(rng.standard_normal(freq.shape), float(np.sqrt(noise_var)))
        return rocof_profile.base_level + derivative + noise

    def empirical_rho(self, dataset: Dataset, kind: SignalKind) -> float:
        """
        Mean pairwise full-length Pearson correlation of one signal.

        Args:
            dataset: Recording to measure
            kind: Signal to correlate

        Returns:
            Mean of the correlation over all PMU pairs
        """
        matrix = dataset.signal_matrix(kind)
        for pmu_id, series in zip(dataset.pmu_ids, matrix):
            if len(series) < 2 or np.var(series) < VARIANCE_FLOOR:
                raise ValueError(f"zero variance in {kind.value} of {pmu_id}")

        values = [pearson(matrix[i], matrix[j]) for i, j in pair_indices(len(matrix))]
        return float(np.mean(values))

    def load_spec(self, path: Union[str, Path]) -> GenSpec:
        """Read a GenSpec JSON document."""
        try:
            return GenSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as e:
            logger.error(f"Error parsing generation spec {path}: {e}")
            raise ValueError(f"Invalid GenSpec JSON in {path}: {e}") from e


# Global generator instance
synth_generator = SyntheticGenerator()
