"""
Metrics - Confusion-matrix ratios and spoof detection latency.

Positive class is "spoofed" throughout. Rates are percentages, F1 is on a 0-1 scale.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from rich import box
from rich.console import Console
from rich.table import Table

from core.features import FeatureTable
from core.models import SpoofSpec

logger = logging.getLogger(__name__)

DEFAULT_RUN_LEN = 30
NEVER = "never"

REPORT_ROWS: List[Tuple[str, str]] = [
    ("Accuracy", "accuracy"),
    ("Sensitivity", "sensitivity"),
    ("Precision", "precision"),
    ("Specificity", "specificity"),
    ("F1", "f1"),
    ("FDR", "fdr"),
]

PairKey = Tuple[str, str]


@dataclass(frozen=True)
class Confusion:
    """Confusion counts with spoofed as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("Confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swap_classes(self) -> 'Confusion':
        """Counts under the opposite positive-class convention."""
        return Confusion(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def confusion(predictions: Sequence[bool], truth: Sequence[bool]) -> Confusion:
    """
    Count outcomes of boolean predictions against boolean ground truth.

    Args:
        predictions: Predicted spoofed flags
        truth: True spoofed flags

    Returns:
        Confusion counts
    """
    pred = np.asarray(predictions, dtype=bool)
    true = np.asarray(truth, dtype=bool)
    if pred.shape != true.shape:
        raise ValueError(f"predictions and truth differ in length: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ValueError("confusion needs at least one row")

    return Confusion(
        tp=int(np.sum(pred & true)),
        fp=int(np.sum(pred & ~true)),
        tn=int(np.sum(~pred & ~true)),
        fn=int(np.sum(~pred & true)),
    )


@dataclass(frozen=True)
class Ratios:
    """The six detection metrics, with flags for filled-in degenerate values."""

    accuracy: float
    sensitivity: Optional[float]
    precision: float
    specificity: Optional[float]
    f1: Optional[float]
    fdr: float
    no_detections: bool = False
    no_positives: bool = False
    no_negatives: bool = False

    def get(self, name: str) -> Optional[float]:
        return getattr(self, name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "precision": self.precision,
            "specificity": self.specificity,
            "f1": self.f1,
            "fdr": self.fdr,
            "flags": {
                "no_detections": self.no_detections,
                "no_positives": self.no_positives,
                "no_negatives": self.no_negatives,
            },
        }


def ratios(c: Confusion) -> Ratios:
    """
    Accuracy, Sensitivity, Precision, Specificity, F1 and FDR of a confusion.

    Precision is filled with 100% (FDR 0%) when nothing was flagged. Sensitivity is
    None when no spoofed rows exist, specificity None when no normal rows exist.
    """
    if c.total == 0:
        raise ValueError("ratios need a non-empty confusion")

    positives, negatives, detected = c.tp + c.fn, c.tn + c.fp, c.tp + c.fp
    accuracy = 100.0 * (c.tp + c.tn) / c.total
    sensitivity = 100.0 * c.tp / positives if positives else None
    specificity = 100.0 * c.tn / negatives if negatives else None
    precision = 100.0 * c.tp / detected if detected else 100.0

    if sensitivity is None:
        f1 = None
    else:
        s, p = sensitivity / 100.0, precision / 100.0
        f1 = 2.0 * s * p / (s + p) if s + p > 0 else 0.0

    return Ratios(
        accuracy=accuracy,
        sensitivity=sensitivity,
        precision=precision,
        specificity=specificity,
        f1=f1,
        fdr=100.0 - precision,
        no_detections=detected == 0,
        no_positives=positives == 0,
        no_negatives=negatives == 0,
    )


def latency(predictions: Sequence[bool], onset_t: int, run_len: int = DEFAULT_RUN_LEN,
            first_cycle: int = 0, duration: Optional[int] = None) -> Optional[int]:
    """
    Cycles from onset until the first run of run_len consecutive positives.

    Args:
        predictions: Per-cycle predictions for one pair; predictions[k] is cycle first_cycle + k
        onset_t: Spoof onset cycle
        run_len: Length of the positive run that marks detection
        first_cycle: Cycle of predictions[0]
        duration: Spoof length; the run must complete inside [onset_t, onset_t + duration)

    Returns:
        Latency in cycles, or None if the spoof is never detected
    """
    if run_len < 1:
        raise ValueError(f"run_len must be at least 1, got {run_len}")
    pred = np.asarray(predictions, dtype=bool)
    start = onset_t - first_cycle
    if start < 0 or start >= len(pred):
        raise ValueError(f"onset_t {onset_t} outside prediction range [{first_cycle}, {first_cycle + len(pred)})")

    stop = len(pred) if duration is None else min(len(pred), start + duration)
    span = pred[start:stop].astype(np.int64)
    if len(span) < run_len:
        return None

    cums = np.concatenate(([0], np.cumsum(span)))
    full_runs = np.flatnonzero(cums[run_len:] - cums[:-run_len] == run_len)
    return int(full_runs[0]) if len(full_runs) else None


@dataclass(frozen=True)
class LatencyEntry:
    minute: int
    pair: PairKey
    latency: Optional[int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "minute": self.minute,
            "pair": list(self.pair),
            "latency": NEVER if self.latency is None else self.latency,
        }


def _from_inf(value: float) -> Optional[int]:
    return None if math.isinf(value) else int(value)


@dataclass(frozen=True)
class LatencyReport:
    """Per (minute, pair) latencies and their aggregates; None means never detected."""

    entries: Tuple[LatencyEntry, ...]
    min_latency: Optional[int]
    max_latency: Optional[int]
    min_of_max: Optional[int]
    per_minute_max: Dict[int, Optional[int]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        def show(value):
            return NEVER if value is None else value

        return {
            "min": show(self.min_latency),
            "max": show(self.max_latency),
            "min_of_max": show(self.min_of_max),
            "per_minute_max": {str(m): show(v) for m, v in sorted(self.per_minute_max.items())},
            "entries": [entry.to_dict() for entry in self.entries],
        }


def aggregate_latency(reports: Mapping[int, Mapping[PairKey, Optional[int]]]) -> LatencyReport:
    """
    Aggregate per-pair latencies grouped by spoofed minute.

    "Never" counts as +inf: min over every (minute, pair), max over every (minute, pair),
    and min over minutes of that minute's worst pair.

    Args:
        reports: {minute: {pair: latency or None}}

    Returns:
        LatencyReport
    """
    if not reports:
        raise ValueError("aggregate_latency needs at least one minute")

    entries = []
    per_minute_max = {}
    for minute in sorted(reports):
        pairs = reports[minute]
        if not pairs:
            raise ValueError(f"Minute {minute} has no pair latencies")
        values = []
        for pair in sorted(pairs):
            value = pairs[pair]
            if value is not None and value < 0:
                raise ValueError(f"Latency must be non-negative, got {value}")
            entries.append(LatencyEntry(minute, tuple(pair), value))
            values.append(math.inf if value is None else value)
        per_minute_max[minute] = max(values)

    all_values = [math.inf if e.latency is None else e.latency for e in entries]
    return LatencyReport(
        entries=tuple(entries),
        min_latency=_from_inf(min(all_values)),
        max_latency=_from_inf(max(all_values)),
        min_of_max=_from_inf(min(per_minute_max.values())),
        per_minute_max={m: _from_inf(v) for m, v in per_minute_max.items()},
    )


def latency_for_pairs(table: FeatureTable, predictions: np.ndarray, truths: Sequence[SpoofSpec],
                      cycles_per_minute: int, run_len: int = DEFAULT_RUN_LEN) -> Dict[int, Dict[PairKey, Optional[int]]]:
    """
    Latency of every pair containing a spoofed PMU, grouped by the minute of the spoof.

    Cycles of the spoofed span with no row in the table count as negative predictions.

    Args:
        table: Feature rows the predictions were made on
        predictions: Boolean prediction per table row
        truths: Spoofs to measure
        cycles_per_minute: Cycles per minute of the recording
        run_len: Positive-run length that marks detection

    Returns:
        {minute: {(pmu_i, pmu_j): latency or None}}
    """
    predictions = np.asarray(predictions, dtype=bool)
    if len(predictions) != len(table):
        raise ValueError(f"Expected {len(table)} predictions, got {len(predictions)}")

    results: Dict[int, Dict[PairKey, Optional[int]]] = {}
    for spec in truths:
        if spec.duration == 0:
            continue
        target = table.pmu_ids.index(spec.target_pmu)
        in_span = (table.cycle >= spec.onset_t) & (table.cycle < spec.end_t)
        involved = in_span & ((table.pair_i == target) | (table.pair_j == target))
        pairs = sorted(set(zip(table.pair_i[involved].tolist(), table.pair_j[involved].tolist())))

        minute = spec.onset_t // cycles_per_minute
        minute_results = results.setdefault(minute, {})
        for i, j in pairs:
            rows = involved & (table.pair_i == i) & (table.pair_j == j)
            series = np.zeros(spec.duration, dtype=bool)
            series[table.cycle[rows] - spec.onset_t] = predictions[rows]
            key = (table.pmu_ids[i], table.pmu_ids[j])
            minute_results[key] = latency(series, spec.onset_t, run_len, first_cycle=spec.onset_t)
            logger.debug(f"Minute {minute} pair {key}: latency {minute_results[key]}")

    return results


def _format_metric(name: str, value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if name == "f1":
        return f"{value:.4f}"
    return f"{value:.2f}%"


def _format_latency(value: Optional[int]) -> str:
    return NEVER if value is None else str(value)


def _render(table: Table) -> str:
    buffer = io.StringIO()
    console = Console(file=buffer, width=120, color_system=None, force_terminal=False, highlight=False)
    console.print(table)
    return buffer.getvalue()


def format_report_table(columns: Mapping[str, Ratios], latencies: Optional[Mapping[str, LatencyReport]] = None,
                        title: str = "Spoof Detection Performance") -> str:
    """
    Plain-text tables: metric rows by model/dataset columns, then latency rows.

    Args:
        columns: {column name: Ratios}
        latencies: Optional {column name: LatencyReport}
        title: Heading of the performance table

    Returns:
        Rendered text
    """
    names = list(columns)
    performance = Table(title=title, box=box.ASCII, title_justify="left")
    performance.add_column("Metric")
    for name in names:
        performance.add_column(name, justify="right")
    for label, attr in REPORT_ROWS:
        performance.add_row(label, *[_format_metric(attr, columns[name].get(attr)) for name in names])

    text = _render(performance)
    if latencies:
        latency_names = list(latencies)
        table = Table(title="Spoof Detection Latency (cycles)", box=box.ASCII, title_justify="left")
        table.add_column("Latency")
        for name in latency_names:
            table.add_column(name, justify="right")
        table.add_row("Min", *[_format_latency(latencies[n].min_latency) for n in latency_names])
        table.add_row("Max", *[_format_latency(latencies[n].max_latency) for n in latency_names])
        table.add_row("Min of max", *[_format_latency(latencies[n].min_of_max) for n in latency_names])
        text += "\n" + _render(table)
    return text
