"""
PMU store for reading and writing recordings and spoof ground truth.
Handles the CSV exchange format and the JSON truth sidecar.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from core.models import DEFAULT_RATE_HZ, Dataset, PmuStream, SignalKind, SpoofSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SIGNAL_COLUMNS: List[str] = [kind.value for kind in SignalKind]
CSV_COLUMNS: List[str] = ["pmu_id", "cycle"] + SIGNAL_COLUMNS
TRUTH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class QualityIssue:
    """A run of repeated values in one signal of one stream."""

    pmu_id: str
    signal: SignalKind
    start: int
    length: int
    kind: str  # 'drop' (zeros) or 'drift' (any other frozen value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pmu_id": self.pmu_id,
            "signal": self.signal.value,
            "start": self.start,
            "length": self.length,
            "kind": self.kind,
        }


class PmuStore:
    """Reads and writes PMU recordings and spoof truth files."""

    # %.17g round-trips every finite double
    float_format: str = "%.17g"

    def load_csv(self, path: PathLike, rate_hz: int = DEFAULT_RATE_HZ) -> Dataset:
        """
        Load a multi-PMU recording from the CSV exchange format.

        Args:
            path: CSV file with one row per (pmu_id, cycle)
            rate_hz: Reporting rate of the recording

        Returns:
            Dataset with streams in order of first appearance, each sorted by cycle
        """
        try:
            try:
                frame = pd.read_csv(
                    path,
                    dtype={"pmu_id": str, "cycle": "int64", **{c: "float64" for c in SIGNAL_COLUMNS}},
                    keep_default_na=False,
                    float_precision="round_trip",
                    encoding="utf-8",
                )
            except FileNotFoundError:
                raise
            except (pd.errors.ParserError, ValueError, TypeError) as e:
                raise ValueError(f"malformed row in {path}: {e}") from e

            if list(frame.columns) != CSV_COLUMNS:
                raise ValueError(f"malformed header in {path}: expected {','.join(CSV_COLUMNS)}")
            if (frame["pmu_id"] == "").any():
                raise ValueError(f"malformed row in {path}: empty pmu_id")
            if frame.duplicated(["pmu_id", "cycle"]).any():
                dup = frame[frame.duplicated(["pmu_id", "cycle"])].iloc[0]
                raise ValueError(f"duplicate (pmu, cycle) in {path}: ({dup['pmu_id']}, {dup['cycle']})")

            streams = []
            for pmu_id in pd.unique(frame["pmu_id"]):
                rows = frame[frame["pmu_id"] == pmu_id].sort_values("cycle", kind="stable")
                cycles = rows["cycle"].to_numpy()
                if not np.array_equal(cycles, np.arange(len(cycles))):
                    raise ValueError(f"non-contiguous cycles for {pmu_id} in {path}")
                streams.append(PmuStream(pmu_id=pmu_id, samples=rows[SIGNAL_COLUMNS].to_numpy(), rate_hz=rate_hz))

            dataset = Dataset(tuple(streams))
            logger.info(f"Loaded {len(streams)} streams x {dataset.n_cycles} cycles from {path}")
            return dataset

        except Exception as e:
            logger.error(f"Error loading dataset from {path}: {e}")
            raise

    def save_csv(self, dataset: Dataset, path: PathLike) -> None:
        """
        Write a recording in the CSV exchange format (UTF-8, LF, full precision).

        Args:
            dataset: Dataset to write
            path: Destination file
        """
        try:
            if dataset.n_cycles == 0:
                raise ValueError("empty dataset")

            self.dataset_frame(dataset).to_csv(
                path, index=False, float_format=self.float_format, lineterminator="\n", encoding="utf-8"
            )
            logger.info(f"Saved {len(dataset.streams)} streams x {dataset.n_cycles} cycles to {path}")

        except Exception as e:
            logger.error(f"Error saving dataset to {path}: {e}")
            raise

    def dataset_frame(self, dataset: Dataset) -> pd.DataFrame:
        """Long-format frame with one row per (pmu_id, cycle)."""
        n = dataset.n_cycles
        frames = []
        for stream in dataset.streams:
            frame = pd.DataFrame(stream.samples, columns=SIGNAL_COLUMNS)
            frame.insert(0, "cycle", np.arange(n, dtype=np.int64))
            frame.insert(0, "pmu_id", stream.pmu_id)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def save_spoof_truth(self, specs: Sequence[SpoofSpec], path: PathLike) -> None:
        """Write the ground-truth sidecar for a spoofed recording."""
        try:
            document = {
                "format_version": TRUTH_FORMAT_VERSION,
                "spoofs": [spec.to_dict() for spec in specs],
            }
            Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
            logger.info(f"Saved {len(specs)} spoof truths to {path}")
        except Exception as e:
            logger.error(f"Error saving spoof truth to {path}: {e}")
            raise

    def load_spoof_truth(self, path: PathLike) -> List[SpoofSpec]:
        """Read a ground-truth sidecar; a bare spec object is accepted as a one-item list."""
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
            if isinstance(document, dict) and "spoofs" in document:
                items = document["spoofs"]
            elif isinstance(document, list):
                items = document
            else:
                items = [document]
            return [SpoofSpec.from_dict(item) for item in items]
        except json.JSONDecodeError as e:
            logger.error(f"Error parsing spoof truth {path}: {e}")
            raise ValueError(f"Invalid spoof truth JSON in {path}: {e}") from e

    def find_drop_drift(self, dataset: Dataset, min_run: int) -> List[QualityIssue]:
        """
        Find data drop (runs of zeros) and data drift (runs of one frozen value).

        Args:
            dataset: Recording to screen
            min_run: Shortest run length reported

        Returns:
            List of QualityIssue, ordered by stream, signal and start cycle
        """
        if min_run < 2:
            raise ValueError(f"min_run must be at least 2, got {min_run}")

        issues = []
        for stream in dataset.streams:
            for kind in SignalKind:
                series = stream.signal(kind)
                if len(series) == 0:
                    continue
                # Run starts are the cycles whose value differs from the previous one
                starts = np.flatnonzero(np.concatenate(([True], series[1:] != series[:-1])))
                lengths = np.diff(np.append(starts, len(series)))
                for start, length in zip(starts, lengths):
                    if length >= min_run:
                        issue_kind = "drop" if series[start] == 0.0 else "drift"
                        issues.append(QualityIssue(stream.pmu_id, kind, int(start), int(length), issue_kind))

        if issues:
            logger.warning(f"Found {len(issues)} drop/drift runs of at least {min_run} cycles")
        return issues


# Global store instance
pmu_store = PmuStore()
