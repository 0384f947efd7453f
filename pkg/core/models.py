"""
Domain Models - Data classes representing PMU recordings and spoof ground truth.
Provides type-safe data structures shared by every stage of the pipeline.
"""

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

DEFAULT_RATE_HZ = 60
SECONDS_PER_MINUTE = 60


class SignalKind(Enum):
    """The eight derived per-cycle PMU quantities, in their fixed column order."""

    VPOS_MAG = "vp_mag"
    VNEG_MAG = "vn_mag"
    VZERO_MAG = "v0_mag"
    PHI_POS = "phi_p"
    PHI_NEG = "phi_n"
    PHI_ZERO = "phi_0"
    FREQ = "freq"
    ROCOF = "rocof"

    @property
    def index(self) -> int:
        """Column position of this signal inside a sample matrix."""
        return _SIGNAL_ORDER.index(self)

    @property
    def is_magnitude(self) -> bool:
        return self in (SignalKind.VPOS_MAG, SignalKind.VNEG_MAG, SignalKind.VZERO_MAG)


_SIGNAL_ORDER: Tuple[SignalKind, ...] = tuple(SignalKind)

# The five correlated signals used as classifier features, in feature order
FEATURE_SIGNALS: Tuple[SignalKind, ...] = (
    SignalKind.VPOS_MAG,
    SignalKind.PHI_POS,
    SignalKind.FREQ,
    SignalKind.PHI_NEG,
    SignalKind.PHI_ZERO,
)

N_SIGNALS = len(_SIGNAL_ORDER)


def _check_sample_matrix(samples: np.ndarray, pmu_id: str) -> None:
    """Raise ValueError unless samples is an (n, 8) finite matrix with non-negative magnitudes."""
    if samples.ndim != 2 or samples.shape[1] != N_SIGNALS:
        raise ValueError(f"Stream {pmu_id}: expected (n, {N_SIGNALS}) samples, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"Stream {pmu_id}: samples must be finite (no NaN/Inf)")
    magnitude_cols = [kind.index for kind in _SIGNAL_ORDER if kind.is_magnitude]
    if samples.size and np.any(samples[:, magnitude_cols] < 0):
        raise ValueError(f"Stream {pmu_id}: voltage magnitudes must be non-negative")


@dataclass(frozen=True)
class SignalVector:
    """One cycle of the eight derived quantities (p.u. magnitudes, radians, Hz, Hz/s)."""

    vp_mag: float
    vn_mag: float
    v0_mag: float
    phi_p: float
    phi_n: float
    phi_0: float
    freq: float
    rocof: float

    def __post_init__(self):
        _check_sample_matrix(self.as_array()[np.newaxis, :], "<vector>")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, kind.value) for kind in _SIGNAL_ORDER], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'SignalVector':
        """Create a SignalVector from eight values in SignalKind order."""
        if len(values) != N_SIGNALS:
            raise ValueError(f"Expected {N_SIGNALS} values, got {len(values)}")
        return cls(**{kind.value: float(v) for kind, v in zip(_SIGNAL_ORDER, values)})

    def get(self, kind: SignalKind) -> float:
        return getattr(self, kind.value)


@dataclass(frozen=True, eq=False)
class PmuStream:
    """Data class representing the recording of one PMU, indexed by cycle."""

    pmu_id: str
    samples: np.ndarray
    rate_hz: int = DEFAULT_RATE_HZ

    def __post_init__(self):
        if not self.pmu_id:
            raise ValueError("pmu_id must be a non-empty string")
        if self.rate_hz < 1:
            raise ValueError(f"Stream {self.pmu_id}: rate_hz must be positive, got {self.rate_hz}")
        samples = np.array(self.samples, dtype=float, copy=True)
        _check_sample_matrix(samples, self.pmu_id)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PmuStream):
            return NotImplemented
        return (
            self.pmu_id == other.pmu_id
            and self.rate_hz == other.rate_hz
            and np.array_equal(self.samples, other.samples)
        )

    def signal(self, kind: SignalKind) -> np.ndarray:
        """Read-only series of one signal."""
        return self.samples[:, kind.index]

    def sample(self, k: int) -> SignalVector:
        return SignalVector.from_array(self.samples[k])

    def time_of(self, k: int) -> float:
        """Seconds since the start of the recording for cycle k."""
        return k / self.rate_hz

    def with_samples(self, samples: np.ndarray) -> 'PmuStream':
        return PmuStream(pmu_id=self.pmu_id, samples=samples, rate_hz=self.rate_hz)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Data class representing a time-aligned multi-PMU recording."""

    streams: Tuple[PmuStream, ...]

    def __post_init__(self):
        streams = tuple(self.streams)
        if len(streams) < 2:
            raise ValueError(f"A dataset needs at least 2 PMU streams, got {len(streams)}")

        ids = [s.pmu_id for s in streams]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Duplicate pmu_id in dataset: {ids}")
        if len({len(s) for s in streams}) != 1:
            raise ValueError("inconsistent stream lengths: " + ", ".join(f"{s.pmu_id}={len(s)}" for s in streams))
        if len({s.rate_hz for s in streams}) != 1:
            raise ValueError("All streams must share the same rate_hz")

        object.__setattr__(self, "streams", streams)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.streams == other.streams

    @property
    def pmu_ids(self) -> List[str]:
        return [s.pmu_id for s in self.streams]

    @property
    def rate_hz(self) -> int:
        return self.streams[0].rate_hz

    @property
    def n_cycles(self) -> int:
        return len(self.streams[0])

    @property
    def cycles_per_minute(self) -> int:
        return self.rate_hz * SECONDS_PER_MINUTE

    @property
    def minute_boundaries(self) -> List[int]:
        """Start cycle of every whole minute contained in the recording."""
        return list(range(0, self.n_cycles - self.cycles_per_minute + 1, self.cycles_per_minute))

    def index_of(self, pmu_id: str) -> int:
        try:
            return self.pmu_ids.index(pmu_id)
        except ValueError:
            raise ValueError(f"Unknown pmu_id: {pmu_id}") from None

    def stream(self, pmu_id: str) -> PmuStream:
        return self.streams[self.index_of(pmu_id)]

    def signal_matrix(self, kind: SignalKind) -> np.ndarray:
        """(n_pmus, n_cycles) matrix of one signal across all streams."""
        return np.stack([s.signal(kind) for s in self.streams])

    def slice(self, start: int, stop: int) -> 'Dataset':
        """Cycles [start, stop) of every stream."""
        return Dataset(tuple(s.with_samples(s.samples[start:stop]) for s in self.streams))

    def replace_stream(self, stream: PmuStream) -> 'Dataset':
        idx = self.index_of(stream.pmu_id)
        streams = list(self.streams)
        streams[idx] = stream
        return Dataset(tuple(streams))


def pair_indices(p: int) -> List[Tuple[int, int]]:
    """
    All PMU index pairs (i, j) with i < j, in lexicographic order.

    Args:
        p: Number of PMUs

    Returns:
        List of p(p-1)/2 index pairs
    """
    if p < 2:
        raise ValueError(f"pair_indices needs at least 2 PMUs, got {p}")
    return list(combinations(range(p), 2))


# Spoof ground truth

class RepeatedLastValue(BaseModel):
    """Hold the last true value for the whole spoof."""

    model_config = ConfigDict(frozen=True)
    kind: Literal["rlv"] = "rlv"


class Mirror(BaseModel):
    """Replay recorded history backwards around the onset pivot."""

    model_config = ConfigDict(frozen=True)
    kind: Literal["mirror"] = "mirror"
    # None means "as long as the spoof needs" (duration - 1)
    history_len_u: Optional[int] = Field(default=None, ge=1)


class TimeDilation(BaseModel):
    """Replay the true signal from the onset at a slower rate."""

    model_config = ConfigDict(frozen=True)
    kind: Literal["dilation"] = "dilation"
    factor: float = Field(default=2.0, gt=1.0)


SpoofKind = Annotated[Union[RepeatedLastValue, Mirror, TimeDilation], Field(discriminator="kind")]

SPOOF_KIND_NAMES = ("rlv", "mirror", "dilation")


def spoof_kind_from_name(name: str, **params: Any) -> Union[RepeatedLastValue, Mirror, TimeDilation]:
    """Build a spoof kind from its short name ('rlv', 'mirror', 'dilation')."""
    kinds = {"rlv": RepeatedLastValue, "mirror": Mirror, "dilation": TimeDilation}
    if name not in kinds:
        raise ValueError(f"Unknown spoof kind: {name}. Expected one of {', '.join(SPOOF_KIND_NAMES)}")
    return kinds[name](**{k: v for k, v in params.items() if v is not None})


class SpoofSpec(BaseModel):
    """Which PMU was attacked, how, and over which cycles."""

    model_config = ConfigDict(frozen=True)

    target_pmu: str
    kind: SpoofKind
    onset_t: int = Field(ge=0)
    duration: int = Field(ge=0)

    @model_validator(mode="before")
    @classmethod
    def _accept_flat_kind(cls, data: Any) -> Any:
        # Flat JSON form: {"kind": "mirror", "history_len_u": 10, ...}
        if isinstance(data, dict) and isinstance(data.get("kind"), str):
            data = dict(data)
            kind_params = {k: data.pop(k) for k in ("history_len_u", "factor") if k in data}
            data["kind"] = {"kind": data["kind"], **kind_params}
        return data

    @property
    def end_t(self) -> int:
        """First cycle after the spoof."""
        return self.onset_t + self.duration

    @property
    def kind_name(self) -> str:
        return self.kind.kind

    def covers(self, cycle: int) -> bool:
        return self.onset_t <= cycle < self.end_t

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SpoofSpec':
        """Create a SpoofSpec from its flat or nested JSON form."""
        return cls.model_validate(data)

    def to_dict(self) -> Dict[str, Any]:
        """Flat JSON form of the spec."""
        kind = self.kind.model_dump()
        return {
            "target_pmu": self.target_pmu,
            "onset_t": self.onset_t,
            "duration": self.duration,
            **kind,
        }


@dataclass(frozen=True, eq=False)
class SpoofedDataset:
    """A recording after one or more spoofs, together with their ground truth."""

    data: Dataset
    truths: Tuple[SpoofSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "truths", tuple(self.truths))
        for spec in self.truths:
            self.data.index_of(spec.target_pmu)
            if spec.end_t > self.data.n_cycles:
                raise ValueError(
                    f"Spoof on {spec.target_pmu} ends at cycle {spec.end_t}, "
                    f"beyond the recording length {self.data.n_cycles}"
                )

    @property
    def truth(self) -> SpoofSpec:
        """The single spoof of a one-spoof dataset."""
        if len(self.truths) != 1:
            raise ValueError(f"Dataset carries {len(self.truths)} spoofs, not exactly one")
        return self.truths[0]

    def label(self, pair: Tuple[int, int], cycle: int) -> bool:
        """True iff the pair contains a spoofed PMU and cycle lies inside that spoof."""
        ids = (self.data.pmu_ids[pair[0]], self.data.pmu_ids[pair[1]])
        return any(spec.target_pmu in ids and spec.covers(cycle) for spec in self.truths)

    def label_mask(self, i: int, j: int, cycles: np.ndarray) -> np.ndarray:
        """Vectorized label() over the given cycles of one pair."""
        mask = np.zeros(len(cycles), dtype=bool)
        ids = (self.data.pmu_ids[i], self.data.pmu_ids[j])
        for spec in self.truths:
            if spec.target_pmu in ids:
                mask |= (cycles >= spec.onset_t) & (cycles < spec.end_t)
        return mask
