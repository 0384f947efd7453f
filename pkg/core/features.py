"""
Features - Sliding-window Pearson correlation between PMU pairs.

For every pair (i, j) with i < j and every window end cycle e, a feature row holds
the correlation of the five feature signals over cycles [e - L + 1, e]. Windows are
identified by their trailing edge. Zero-variance windows yield r = 0.
"""

import json
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from core.models import FEATURE_SIGNALS, Dataset, SpoofedDataset, pair_indices

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-24
STD_FLOOR = 1e-12
RECOMPUTE_PERIOD = 4096
# Windows whose variance is this small relative to their block are recomputed directly
CANCELLATION_RATIO = 1e-2
# Streaming sums are rebuilt once their window variance falls below this share of the
# squared terms accumulated since the last rebuild
ACCUMULATION_RATIO = 1e-4
DIRECT_BATCH = 2048

FEATURE_COLUMNS: List[str] = ["r_vp", "r_phip", "r_f", "r_phin", "r_phi0"]
FEATURE_CSV_COLUMNS: List[str] = ["pmu_i", "pmu_j", "cycle"] + FEATURE_COLUMNS + ["label"]


class WindowConfig(BaseModel):
    """Sliding window length and step, in cycles."""

    model_config = ConfigDict(frozen=True)

    window_len: int = Field(default=300, ge=2)
    step: int = Field(default=1, ge=1)

    def n_windows(self, n_cycles: int) -> int:
        if n_cycles < self.window_len:
            return 0
        return (n_cycles - self.window_len) // self.step + 1

    def window_ends(self, n_cycles: int) -> np.ndarray:
        return np.arange(self.window_len - 1, n_cycles, self.step, dtype=np.int64)


def _clamp(r: float) -> float:
    if abs(r) > 1.0 + 1e-12:
        logger.warning(f"Correlation {r!r} exceeds [-1, 1] by more than rounding")
    return min(1.0, max(-1.0, r))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Pearson correlation coefficient of two equal-length series.

    Uses two passes with numpy's pairwise summation. Returns 0 when either series
    has (population) variance below 1e-24.

    Args:
        x: First series
        y: Second series

    Returns:
        Correlation in [-1, 1]
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs two 1-D series of equal length, got {x.shape} and {y.shape}")
    n = len(x)
    if n < 2:
        raise ValueError(f"pearson needs at least 2 samples, got {n}")

    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    if sxx / n < VARIANCE_FLOOR or syy / n < VARIANCE_FLOOR:
        return 0.0
    return _clamp(float(np.sum(dx * dy)) / math.sqrt(sxx * syy))


def _nonzero_step_counts(series: np.ndarray) -> np.ndarray:
    """counts[k] = number of k' < k with series[k' + 1] != series[k']."""
    steps = (series[1:] != series[:-1]).astype(np.int64)
    return np.concatenate(([0], np.cumsum(steps)))


def _direct_pearson(x: np.ndarray, y: np.ndarray, starts: np.ndarray, window_len: int) -> np.ndarray:
    """Two-pass correlation of the windows beginning at starts, in row batches."""
    x_windows = np.lib.stride_tricks.sliding_window_view(x, window_len)
    y_windows = np.lib.stride_tricks.sliding_window_view(y, window_len)
    r = np.zeros(len(starts))
    for begin in range(0, len(starts), DIRECT_BATCH):
        rows = starts[begin:begin + DIRECT_BATCH]
        dx = x_windows[rows]
        dy = y_windows[rows]
        dx = dx - dx.mean(axis=1, keepdims=True)
        dy = dy - dy.mean(axis=1, keepdims=True)
        sxx = np.sum(dx * dx, axis=1)
        syy = np.sum(dy * dy, axis=1)
        sxy = np.sum(dx * dy, axis=1)
        live = (sxx / window_len >= VARIANCE_FLOOR) & (syy / window_len >= VARIANCE_FLOOR)
        batch = np.zeros(len(rows))
        batch[live] = sxy[live] / np.sqrt(sxx[live] * syy[live])
        r[begin:begin + len(rows)] = batch
    return r


def _block_pearson(x: np.ndarray, y: np.ndarray, window_len: int) -> np.ndarray:
    """Correlation for every window end inside one block, from rolling sums of the centered block."""
    n_windows = len(x) - window_len + 1
    dx = x - x.mean()
    dy = y - y.mean()

    def rolling(values: np.ndarray) -> np.ndarray:
        cums = np.concatenate(([0.0], np.cumsum(values)))
        return cums[window_len:] - cums[:n_windows]

    sum_x, sum_y = rolling(dx), rolling(dy)
    sxx = rolling(dx * dx) - sum_x * sum_x / window_len
    syy = rolling(dy * dy) - sum_y * sum_y / window_len
    sxy = rolling(dx * dy) - sum_x * sum_y / window_len

    r = np.zeros(n_windows)
    live = (sxx / window_len >= VARIANCE_FLOOR) & (syy / window_len >= VARIANCE_FLOOR)
    r[live] = sxy[live] / np.sqrt(sxx[live] * syy[live])

    # Rolling-sum error scales with the block's variance, not the window's
    block_sxx = float(np.dot(dx, dx)) / len(x) * window_len
    block_syy = float(np.dot(dy, dy)) / len(y) * window_len
    quiet = np.flatnonzero((sxx < CANCELLATION_RATIO * block_sxx) | (syy < CANCELLATION_RATIO * block_syy))
    if len(quiet):
        logger.debug(f"Recomputing {len(quiet)} of {n_windows} quiet windows directly")
        r[quiet] = _direct_pearson(x, y, quiet, window_len)

    if np.any(np.abs(r) > 1.0 + 1e-12):
        logger.warning("Sliding correlation exceeded [-1, 1] by more than rounding")
    return np.clip(r, -1.0, 1.0)


def sliding_pearson(x: Sequence[float], y: Sequence[float],
                    cfg: Optional[WindowConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Windowed Pearson correlation at every window end e = L-1, L-1+step, ...

    Rolling sums of x, y, x^2, y^2 and xy are rebuilt from scratch every 4096 window
    advances to bound drift.

    Args:
        x: First series
        y: Second series
        cfg: Window length and step

    Returns:
        (cycles, r): window end cycles and their correlations
    """
    cfg = cfg or WindowConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"sliding_pearson needs two 1-D series of equal length, got {x.shape} and {y.shape}")
    n, window_len = len(x), cfg.window_len
    if n < window_len:
        raise ValueError(f"series shorter than window: {n} < {window_len}")

    all_ends = n - window_len + 1
    r = np.empty(all_ends)
    for start in range(0, all_ends, RECOMPUTE_PERIOD):
        stop = min(start + RECOMPUTE_PERIOD, all_ends)
        r[start:stop] = _block_pearson(x[start:stop + window_len - 1], y[start:stop + window_len - 1], window_len)

    # Constant windows are detected exactly, independent of rounding in the sums
    counts_x, counts_y = _nonzero_step_counts(x), _nonzero_step_counts(y)
    first = np.arange(all_ends)
    last = first + window_len - 1
    flat = ((counts_x[last] - counts_x[first]) == 0) | ((counts_y[last] - counts_y[first]) == 0)
    r[flat] = 0.0

    ends = cfg.window_ends(n)
    return ends, r[ends - (window_len - 1)]


class RollingPearson:
    """
    Streaming windowed correlation: push one (x, y) sample per cycle.

    Keeps running sums over the last window_len samples, shifted by a reference
    point that is reset to the window mean every 4096 pushes, or sooner when the
    window has become too quiet for the accumulated rounding error.
    """

    def __init__(self, window_len: int = 300):
        if window_len < 2:
            raise ValueError(f"window_len must be at least 2, got {window_len}")
        self.window_len = window_len
        self._xs: deque = deque()
        self._ys: deque = deque()
        self._steps_x = 0
        self._steps_y = 0
        self._since_recompute = 0
        self._ref_x = 0.0
        self._ref_y = 0.0
        self._sums = np.zeros(5)  # sx, sy, sxx, syy, sxy of shifted values
        self._mass = np.zeros(2)  # squared x and y terms added or removed since the last rebuild
        self.cycle = -1

    @property
    def ready(self) -> bool:
        return len(self._xs) == self.window_len

    def _terms(self, x: float, y: float) -> np.ndarray:
        dx, dy = x - self._ref_x, y - self._ref_y
        return np.array([dx, dy, dx * dx, dy * dy, dx * dy])

    def _recompute(self) -> None:
        xs, ys = np.fromiter(self._xs, float), np.fromiter(self._ys, float)
        self._ref_x, self._ref_y = float(xs.mean()), float(ys.mean())
        dx, dy = xs - self._ref_x, ys - self._ref_y
        self._sums = np.array([dx.sum(), dy.sum(), (dx * dx).sum(), (dy * dy).sum(), (dx * dy).sum()])
        self._mass = self._sums[2:4].copy()
        self._since_recompute = 0

    def push(self, x: float, y: float) -> Optional[float]:
        """
        Add one sample pair.

        Returns:
            Correlation of the window ending at this sample, or None while filling
        """
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("RollingPearson needs finite samples")
        self.cycle += 1

        if self._xs:
            self._steps_x += self._xs[-1] != x
            self._steps_y += self._ys[-1] != y
        if not self._xs:
            self._ref_x, self._ref_y = x, y
        self._xs.append(x)
        self._ys.append(y)
        added = self._terms(x, y)
        self._sums += added
        self._mass += added[2:4]

        if len(self._xs) > self.window_len:
            old_x, old_y = self._xs.popleft(), self._ys.popleft()
            self._steps_x -= self._xs[0] != old_x
            self._steps_y -= self._ys[0] != old_y
            removed = self._terms(old_x, old_y)
            self._sums -= removed
            self._mass += removed[2:4]

        self._since_recompute += 1
        if self._since_recompute >= RECOMPUTE_PERIOD:
            self._recompute()

        if not self.ready:
            return None
        return self.value()

    def value(self) -> float:
        """Correlation of the current full window."""
        if not self.ready:
            raise ValueError("window not yet full")
        if self._steps_x == 0 or self._steps_y == 0:
            return 0.0

        n = self.window_len
        sx, sy, sxx, syy, sxy = self._sums
        vxx = sxx - sx * sx / n
        vyy = syy - sy * sy / n
        if vxx < ACCUMULATION_RATIO * self._mass[0] or vyy < ACCUMULATION_RATIO * self._mass[1]:
            self._recompute()
            sx, sy, sxx, syy, sxy = self._sums
            vxx = sxx - sx * sx / n
            vyy = syy - sy * sy / n
        if vxx / n < VARIANCE_FLOOR or vyy / n < VARIANCE_FLOOR:
            return 0.0
        return _clamp((sxy - sx * sy / n) / math.sqrt(vxx * vyy))


@dataclass(frozen=True)
class FeatureRow:
    """One (pair, window end) example."""

    pair: Tuple[str, str]
    cycle: int
    r: Tuple[float, ...]
    label: bool


class FeatureTable:
    """
    Columnar feature rows, ordered by (pair, cycle).

    Attributes:
        pair_i, pair_j: PMU indices into pmu_ids (pair_i < pair_j)
        cycle: Window end cycle
        r: (n, 5) correlations in FEATURE_SIGNALS order
        label: True for spoofed rows
    """

    def __init__(self, pmu_ids: Sequence[str], pair_i: np.ndarray, pair_j: np.ndarray,
                 cycle: np.ndarray, r: np.ndarray, label: np.ndarray):
        self.pmu_ids = list(pmu_ids)
        self.pair_i = np.asarray(pair_i, dtype=np.int64)
        self.pair_j = np.asarray(pair_j, dtype=np.int64)
        self.cycle = np.asarray(cycle, dtype=np.int64)
        self.r = np.asarray(r, dtype=float).reshape(-1, len(FEATURE_SIGNALS))
        self.label = np.asarray(label, dtype=bool)

        n = len(self.cycle)
        if not all(len(a) == n for a in (self.pair_i, self.pair_j, self.r, self.label)):
            raise ValueError("FeatureTable columns differ in length")

    def __len__(self) -> int:
        return len(self.cycle)

    def __iter__(self) -> Iterator[FeatureRow]:
        for k in range(len(self)):
            yield self.row(k)

    def row(self, k: int) -> FeatureRow:
        return FeatureRow(
            pair=(self.pmu_ids[self.pair_i[k]], self.pmu_ids[self.pair_j[k]]),
            cycle=int(self.cycle[k]),
            r=tuple(float(v) for v in self.r[k]),
            label=bool(self.label[k]),
        )

    @property
    def n_positive(self) -> int:
        return int(self.label.sum())

    def select(self, mask: np.ndarray) -> 'FeatureTable':
        """Rows where mask is true (boolean mask or index array), keeping their order."""
        return FeatureTable(self.pmu_ids, self.pair_i[mask], self.pair_j[mask],
                            self.cycle[mask], self.r[mask], self.label[mask])

    def minute_of(self, cycles_per_minute: int) -> np.ndarray:
        """Minute index of every row, by the minute containing its window end."""
        return self.cycle // cycles_per_minute

    def equals(self, other: 'FeatureTable') -> bool:
        """Bit-exact equality of all columns."""
        return (
            self.pmu_ids == other.pmu_ids
            and np.array_equal(self.pair_i, other.pair_i)
            and np.array_equal(self.pair_j, other.pair_j)
            and np.array_equal(self.cycle, other.cycle)
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.label, other.label)
        )

    def to_frame(self) -> pd.DataFrame:
        ids = np.asarray(self.pmu_ids, dtype=object)
        frame = pd.DataFrame(self.r, columns=FEATURE_COLUMNS)
        frame.insert(0, "cycle", self.cycle)
        frame.insert(0, "pmu_j", ids[self.pair_j] if len(self) else [])
        frame.insert(0, "pmu_i", ids[self.pair_i] if len(self) else [])
        frame["label"] = self.label.astype(np.int64)
        return frame


def _pair_signal_task(task: Tuple[int, int, np.ndarray, np.ndarray, WindowConfig]) -> Tuple[int, int, np.ndarray]:
    pair_pos, signal_pos, x, y, cfg = task
    _, r = sliding_pearson(x, y, cfg)
    return pair_pos, signal_pos, r


def _resolve_pairs(n_pmus: int, pairs: Optional[Sequence[Tuple[int, int]]]) -> List[Tuple[int, int]]:
    if pairs is None:
        return pair_indices(n_pmus)
    resolved = sorted({(int(i), int(j)) for i, j in pairs})
    for i, j in resolved:
        if not 0 <= i < j < n_pmus:
            raise ValueError(f"Invalid PMU pair ({i}, {j}) for {n_pmus} PMUs")
    if not resolved:
        raise ValueError("pairs must not be empty")
    return resolved


def extract(source: Union[SpoofedDataset, Dataset], cfg: Optional[WindowConfig] = None,
            workers: int = 1, pairs: Optional[Sequence[Tuple[int, int]]] = None) -> FeatureTable:
    """
    Pairwise sliding-window correlation features.

    Work is split into (pair x signal) tasks. With workers > 1 they run in a process
    pool; results are placed by key, so the table does not depend on scheduling.

    Args:
        source: Recording, with ground truth if spoofed (plain Dataset labels all rows normal)
        cfg: Window configuration
        workers: Number of worker processes
        pairs: Optional subset of PMU index pairs; defaults to all pairs

    Returns:
        FeatureTable ordered by (pair, cycle)
    """
    cfg = cfg or WindowConfig()
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")

    try:
        dataset = source.data if isinstance(source, SpoofedDataset) else source
        if dataset.n_cycles < cfg.window_len:
            raise ValueError(f"series shorter than window: {dataset.n_cycles} < {cfg.window_len}")

        pair_list = _resolve_pairs(len(dataset.streams), pairs)
        matrices = [dataset.signal_matrix(kind) for kind in FEATURE_SIGNALS]
        tasks = [
            (p, s, matrices[s][i], matrices[s][j], cfg)
            for p, (i, j) in enumerate(pair_list)
            for s in range(len(FEATURE_SIGNALS))
        ]
        logger.info(f"Extracting {len(tasks)} pair-signal correlations with {workers} worker(s)")

        ends = cfg.window_ends(dataset.n_cycles)
        per_pair = len(ends)
        r = np.empty((len(pair_list), per_pair, len(FEATURE_SIGNALS)))
        if workers == 1:
            results = map(_pair_signal_task, tasks)
            for pair_pos, signal_pos, values in results:
                r[pair_pos, :, signal_pos] = values
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                for pair_pos, signal_pos, values in executor.map(_pair_signal_task, tasks, chunksize=4):
                    r[pair_pos, :, signal_pos] = values

        pair_i = np.repeat([i for i, _ in pair_list], per_pair)
        pair_j = np.repeat([j for _, j in pair_list], per_pair)
        cycle = np.tile(ends, len(pair_list))
        if isinstance(source, SpoofedDataset):
            label = np.concatenate([source.label_mask(i, j, ends) for i, j in pair_list])
        else:
            label = np.zeros(len(cycle), dtype=bool)

        table = FeatureTable(dataset.pmu_ids, pair_i, pair_j, cycle, r.reshape(-1, len(FEATURE_SIGNALS)), label)
        logger.info(f"Extracted {len(table)} feature rows ({table.n_positive} spoofed)")
        return table

    except Exception as e:
        logger.error(f"Error extracting features: {e}")
        raise


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature affine transform fitted on training rows."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        std = np.array(self.std, dtype=float)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("Standardizer mean and std must be 1-D arrays of equal length")
        if np.any(std <= 0) or not np.all(np.isfinite(std)) or not np.all(np.isfinite(mean)):
            raise ValueError("Standardizer needs finite means and positive stds")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.mean):
            raise ValueError(f"Expected {len(self.mean)} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def transform_table(self, table: FeatureTable) -> FeatureTable:
        """Copy of a feature table with standardized correlations."""
        return FeatureTable(table.pmu_ids, table.pair_i, table.pair_j, table.cycle,
                            self.transform(table.r), table.label)

    def equals(self, other: 'Standardizer', tol: float = 0.0) -> bool:
        return (
            self.mean.shape == other.mean.shape
            and bool(np.all(np.abs(self.mean - other.mean) <= tol))
            and bool(np.all(np.abs(self.std - other.std) <= tol))
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Standardizer':
        return cls(mean=np.asarray(data["mean"], dtype=float), std=np.asarray(data["std"], dtype=float))


def fit_standardizer(rows: Union[FeatureTable, np.ndarray]) -> Standardizer:
    """
    Fit per-feature mean and population std on training rows.

    Stds below 1e-12 are replaced by 1.

    Args:
        rows: FeatureTable or (n, d) feature matrix

    Returns:
        Fitted Standardizer
    """
    X = rows.r if isinstance(rows, FeatureTable) else np.asarray(rows, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("Cannot fit a standardizer on empty input")
    if len(X) < 2:
        raise ValueError(f"Standardizer needs at least 2 rows, got {len(X)}")
    if not np.all(np.isfinite(X)):
        raise ValueError("Standardizer input must be finite")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return Standardizer(mean=mean, std=std)


def realtime_cores(cpu_seconds_per_minute: float, n_correlations: int, max_utilization: float = 0.9) -> int:
    """
    CPU cores needed to compute correlations as fast as data arrives.

    Args:
        cpu_seconds_per_minute: CPU time for one correlation over one minute of data
        n_correlations: Number of pair-signal correlations maintained
        max_utilization: Highest sustained load allowed per core

    Returns:
        Whole number of cores
    """
    if cpu_seconds_per_minute <= 0 or n_correlations < 1:
        raise ValueError("cpu_seconds_per_minute must be positive and n_correlations at least 1")
    if not 0 < max_utilization <= 1:
        raise ValueError(f"max_utilization must be in (0, 1], got {max_utilization}")
    return math.ceil(cpu_seconds_per_minute * n_correlations / (60.0 * max_utilization))


def save_features(table: FeatureTable, path: Union[str, Path]) -> None:
    """Write feature rows as CSV (pmu ids, window end, five correlations, 0/1 label)."""
    try:
        table.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
        logger.info(f"Saved {len(table)} feature rows to {path}")
    except Exception as e:
        logger.error(f"Error saving features to {path}: {e}")
        raise


def load_features(path: Union[str, Path]) -> FeatureTable:
    """Read feature rows written by save_features."""
    try:
        try:
            frame = pd.read_csv(path, dtype={"pmu_i": str, "pmu_j": str}, keep_default_na=False,
                                float_precision="round_trip", encoding="utf-8")
        except FileNotFoundError:
            raise
        except (pd.errors.ParserError, ValueError) as e:
            raise ValueError(f"malformed feature file {path}: {e}") from e
        if list(frame.columns) != FEATURE_CSV_COLUMNS:
            raise ValueError(f"malformed header in {path}: expected {','.join(FEATURE_CSV_COLUMNS)}")

        pmu_ids = list(pd.unique(pd.concat([frame["pmu_i"], frame["pmu_j"]], ignore_index=True)))
        index = {pmu_id: k for k, pmu_id in enumerate(pmu_ids)}
        try:
            r = frame[FEATURE_COLUMNS].to_numpy(dtype=float)
            cycle = frame["cycle"].to_numpy(dtype=np.int64)
            label = frame["label"].to_numpy(dtype=np.int64)
        except (TypeError, ValueError) as e:
            raise ValueError(f"malformed feature file {path}: {e}") from e
        if not np.all(np.isin(label, (0, 1))):
            raise ValueError(f"malformed feature file {path}: label must be 0 or 1")

        return FeatureTable(
            pmu_ids,
            frame["pmu_i"].map(index).to_numpy(),
            frame["pmu_j"].map(index).to_numpy(),
            cycle,
            r,
            label.astype(bool),
        )

    except Exception as e:
        logger.error(f"Error loading features from {path}: {e}")
        raise


def save_standardizer(standardizer: Standardizer, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(standardizer.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_standardizer(path: Union[str, Path]) -> Standardizer:
    try:
        return Standardizer.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError) as e:
        raise ValueError(f"Invalid standardizer file {path}: {e}") from e
