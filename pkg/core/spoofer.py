"""
Spoofer - Injects Repeated-Last-Value, Mirror and Time-Dilation spoofs into PMU streams.

A spoof replaces cycles [onset_t, onset_t + duration) of every signal of one PMU,
computed only from that PMU's own recorded history. Cycles outside the span are
never touched, and the spoof makes no attempt to re-align with the true signal
when it ends.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from core.models import (
    Dataset,
    Mirror,
    PmuStream,
    RepeatedLastValue,
    SignalKind,
    SpoofedDataset,
    SpoofSpec,
    TimeDilation,
    spoof_kind_from_name,
)

logger = logging.getLogger(__name__)


@dataclass
class ConstraintReport:
    """Outcome of checking a spoofed stream against the attacker constraints."""

    in_historical_range: bool
    onset_step_bounded: bool
    outside_untouched: bool
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.in_historical_range and self.onset_step_bounded and self.outside_untouched

    def to_dict(self):
        return {
            "in_historical_range": self.in_historical_range,
            "onset_step_bounded": self.onset_step_bounded,
            "outside_untouched": self.outside_untouched,
            "violations": list(self.violations),
        }


class Spoofer:
    """Applies spoof strategies to PMU streams and datasets."""

    def _check_span(self, stream: PmuStream, onset_t: int, duration: int) -> None:
        if onset_t < 0 or duration < 0:
            raise ValueError(f"onset_t and duration must be non-negative, got {onset_t}, {duration}")
        if onset_t + duration > len(stream):
            raise ValueError(
                f"Spoof [{onset_t}, {onset_t + duration}) exceeds stream {stream.pmu_id} of length {len(stream)}"
            )

    def _splice(self, stream: PmuStream, onset_t: int, segment: np.ndarray) -> PmuStream:
        samples = stream.samples.copy()
        samples[onset_t:onset_t + len(segment)] = segment
        return stream.with_samples(samples)

    def apply_rlv(self, stream: PmuStream, onset_t: int, duration: int) -> PmuStream:
        """
        Hold the last true sample before onset for the whole spoof.

        Args:
            stream: True stream of the target PMU
            onset_t: First spoofed cycle (at least 1)
            duration: Number of spoofed cycles

        Returns:
            Spoofed copy of the stream
        """
        self._check_span(stream, onset_t, duration)
        if duration == 0:
            return stream
        if onset_t < 1:
            raise ValueError("Repeated-last-value spoof needs onset_t >= 1 (no prior value to repeat)")

        segment = np.repeat(stream.samples[onset_t - 1][np.newaxis, :], duration, axis=0)
        return self._splice(stream, onset_t, segment)

    def apply_mirror(self, stream: PmuStream, onset_t: int, duration: int, u: Optional[int] = None) -> PmuStream:
        """
        Replay history backwards around the onset: s(onset + i) = s_true(onset - i).

        Beyond u cycles the reflection bounces back (ping-pong with period 2u).

        Args:
            stream: True stream of the target PMU
            onset_t: Pivot cycle, also the first spoofed cycle
            duration: Number of spoofed cycles
            u: Recorded history length; defaults to duration - 1

        Returns:
            Spoofed copy of the stream
        """
        self._check_span(stream, onset_t, duration)
        if duration == 0:
            return stream
        if u is None:
            u = max(1, duration - 1)
        if u < 1:
            raise ValueError(f"history_len_u must be at least 1, got {u}")
        if onset_t < u:
            raise ValueError(f"Mirror spoof needs onset_t >= u, got onset_t={onset_t}, u={u}")

        offsets = np.arange(duration) % (2 * u)
        offsets = np.where(offsets > u, 2 * u - offsets, offsets)
        return self._splice(stream, onset_t, stream.samples[onset_t - offsets])

    def apply_dilation(self, stream: PmuStream, onset_t: int, duration: int, factor: float = 2.0) -> PmuStream:
        """
        Replay the true signal from onset at 1/factor speed.

        s(k) = s_true(onset + (k - onset) / factor), linearly interpolated between the
        bracketing true samples when the source index is fractional.

        Args:
            stream: True stream of the target PMU
            onset_t: First spoofed cycle
            duration: Number of spoofed cycles
            factor: Slow-down factor, greater than 1

        Returns:
            Spoofed copy of the stream
        """
        self._check_span(stream, onset_t, duration)
        if factor <= 1.0:
            raise ValueError(f"Dilation factor must be greater than 1, got {factor}")
        if duration == 0:
            return stream

        source = onset_t + np.arange(duration) / factor
        lower = np.floor(source).astype(np.int64)
        upper = np.ceil(source).astype(np.int64)
        if upper[-1] >= len(stream):
            raise ValueError(
                f"source window exceeds recording: needs cycle {upper[-1]}, stream has {len(stream)}"
            )

        frac = (source - lower)[:, np.newaxis]
        low_values = stream.samples[lower]
        segment = low_values + frac * (stream.samples[upper] - low_values)
        return self._splice(stream, onset_t, segment)

    def spoof_stream(self, stream: PmuStream, spec: SpoofSpec) -> PmuStream:
        """Dispatch one spec to its strategy."""
        kind = spec.kind
        if isinstance(kind, RepeatedLastValue):
            return self.apply_rlv(stream, spec.onset_t, spec.duration)
        if isinstance(kind, Mirror):
            return self.apply_mirror(stream, spec.onset_t, spec.duration, kind.history_len_u)
        if isinstance(kind, TimeDilation):
            return self.apply_dilation(stream, spec.onset_t, spec.duration, kind.factor)
        raise ValueError(f"Unsupported spoof kind: {kind!r}")

    def apply(self, dataset: Dataset, spec: SpoofSpec) -> SpoofedDataset:
        """
        Spoof one PMU of a dataset.

        Args:
            dataset: True recording
            spec: Target, strategy and span

        Returns:
            SpoofedDataset with spec as its ground truth
        """
        return self.apply_all(dataset, [spec])

    def apply_all(self, dataset: Dataset, specs: Sequence[SpoofSpec]) -> SpoofedDataset:
        """
        Apply several spoofs, each computed from the true recording.

        Spans on the same target PMU must not overlap.
        """
        try:
            by_target = {}
            for spec in specs:
                dataset.index_of(spec.target_pmu)
                for other in by_target.get(spec.target_pmu, []):
                    if spec.onset_t < other.end_t and other.onset_t < spec.end_t:
                        raise ValueError(
                            f"Overlapping spoofs on {spec.target_pmu}: "
                            f"[{other.onset_t}, {other.end_t}) and [{spec.onset_t}, {spec.end_t})"
                        )
                by_target.setdefault(spec.target_pmu, []).append(spec)

            spoofed = dataset
            for pmu_id, target_specs in by_target.items():
                true_stream = dataset.stream(pmu_id)
                samples = true_stream.samples.copy()
                for spec in target_specs:
                    attacked = self.spoof_stream(true_stream, spec)
                    samples[spec.onset_t:spec.end_t] = attacked.samples[spec.onset_t:spec.end_t]
                    logger.debug(f"Applied {spec.kind_name} to {pmu_id} over [{spec.onset_t}, {spec.end_t})")
                spoofed = spoofed.replace_stream(true_stream.with_samples(samples))

            return SpoofedDataset(data=spoofed, truths=tuple(specs))

        except Exception as e:
            logger.error(f"Error applying spoofs: {e}")
            raise

    def default_spec(self, dataset: Dataset, target_pmu: str, kind: str = "rlv", minute: int = 0,
                     **params) -> SpoofSpec:
        """
        Protocol placement: the last 30 seconds of the given minute.

        Args:
            dataset: Recording the spec will be applied to
            target_pmu: PMU to attack
            kind: 'rlv', 'mirror' or 'dilation'
            minute: Zero-based minute index
            **params: Strategy parameters (history_len_u, factor)

        Returns:
            SpoofSpec for that minute
        """
        cycles_per_minute = dataset.cycles_per_minute
        if minute < 0 or (minute + 1) * cycles_per_minute > dataset.n_cycles:
            raise ValueError(f"Minute {minute} is outside a recording of {dataset.n_cycles} cycles")
        dataset.index_of(target_pmu)

        half = cycles_per_minute // 2
        return SpoofSpec(
            target_pmu=target_pmu,
            kind=spoof_kind_from_name(kind, **params),
            onset_t=minute * cycles_per_minute + half,
            duration=cycles_per_minute - half,
        )

    def check_constraints(self, true_stream: PmuStream, spoofed_stream: PmuStream,
                          spec: SpoofSpec) -> ConstraintReport:
        """
        Check a spoofed stream against the attacker constraints.

        History is the true signal up to and including the onset cycle. The report
        covers the historical range of the spoofed values, the size of the step into
        the spoof, and that nothing outside the span changed.
        """
        if spec.onset_t < 1:
            raise ValueError("Constraint check needs at least one cycle of history before onset")
        if len(true_stream) != len(spoofed_stream):
            raise ValueError("True and spoofed streams differ in length")

        violations = []
        history = true_stream.samples[:spec.onset_t + 1]
        segment = spoofed_stream.samples[spec.onset_t:spec.end_t]

        in_range = True
        if len(segment):
            low, high = history.min(axis=0), history.max(axis=0)
            for kind in SignalKind:
                col = segment[:, kind.index]
                if col.min() < low[kind.index] or col.max() > high[kind.index]:
                    in_range = False
                    violations.append(f"{kind.value} leaves historical range")

        step_ok = True
        if len(segment):
            max_step = np.abs(np.diff(history, axis=0)).max(axis=0)
            onset_step = np.abs(segment[0] - true_stream.samples[spec.onset_t - 1])
            for kind in SignalKind:
                if onset_step[kind.index] > max_step[kind.index]:
                    step_ok = False
                    violations.append(f"{kind.value} onset step exceeds largest historical step")

        outside = np.ones(len(true_stream), dtype=bool)
        outside[spec.onset_t:spec.end_t] = False
        untouched = bool(np.array_equal(true_stream.samples[outside], spoofed_stream.samples[outside]))
        if not untouched:
            violations.append("samples outside the spoof span changed")

        report = ConstraintReport(in_range, step_ok, untouched, violations)
        if not report.ok:
            logger.warning(f"Spoof {spec.kind_name} on {spec.target_pmu}: {'; '.join(violations)}")
        return report


# Global spoofer instance
spoofer = Spoofer()
