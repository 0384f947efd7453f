"""
Experiment Harness - End-to-end spoof detection experiments on synthetic recordings.

One run: generate a recording, spoof the last 30 seconds of every minute on a
seeded-chosen PMU, extract pairwise correlation features, split whole minutes into
train and test, standardize on train rows only, train the requested models, and
score the test minutes with detection metrics and latency.
"""

import hashlib
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.classifiers import (
    GridSearchResult,
    TrainConfig,
    grid_search_svm,
    predict_batch,
    train_mlp,
    train_svm,
)
from core.features import FeatureTable, Standardizer, WindowConfig, extract, fit_standardizer
from core.metrics import (
    Confusion,
    LatencyReport,
    Ratios,
    aggregate_latency,
    confusion,
    format_report_table,
    latency_for_pairs,
    ratios,
)
from core.models import Dataset, RepeatedLastValue, SpoofedDataset, SpoofKind, SpoofSpec
from core.pmu_store import pmu_store
from core.spoofer import spoofer
from core.synth_gen import GenSpec, synth_generator

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1
# Share of training minutes held out for validation during grid search
GRID_VALIDATION_SHARE = 3 / 11


class ExperimentStageError(Exception):
    """A pipeline stage failed; carries the stage name and the underlying error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class ExperimentSpec(BaseModel):
    """Everything that determines one experiment."""

    model_config = ConfigDict(frozen=True)

    gen: GenSpec = Field(default_factory=GenSpec)
    spoof_kind: SpoofKind = Field(default_factory=RepeatedLastValue)
    n_minutes: int = Field(default=14, ge=2)
    train_minutes: int = Field(default=11, ge=1)
    test_minutes: int = Field(default=3, ge=1)
    window: WindowConfig = Field(default_factory=WindowConfig)
    models: Tuple[Literal["svm", "mlp"], ...] = ("svm", "mlp")
    train_cfg: TrainConfig = Field(default_factory=TrainConfig)
    seed: int = Field(default=42, ge=0, lt=2**64)
    split: Literal["chronological", "random"] = "chronological"
    latency_run_len: int = Field(default=30, ge=1)

    @field_validator("spoof_kind", mode="before")
    @classmethod
    def _kind_by_name(cls, value: Any) -> Any:
        if isinstance(value, str):
            return {"kind": value}
        return value

    @model_validator(mode="after")
    def _check_split(self) -> 'ExperimentSpec':
        if self.train_minutes + self.test_minutes != self.n_minutes:
            raise ValueError(
                f"train_minutes + test_minutes must equal n_minutes "
                f"({self.train_minutes} + {self.test_minutes} != {self.n_minutes})"
            )
        if not self.models:
            raise ValueError("models must name at least one of svm, mlp")
        if len(set(self.models)) != len(self.models):
            raise ValueError(f"Duplicate model names: {self.models}")
        cycles_per_minute = 60 * self.gen.rate_hz
        if self.window.window_len > cycles_per_minute // 2:
            raise ValueError(
                f"window_len {self.window.window_len} must fit in the unspoofed half minute "
                f"({cycles_per_minute // 2} cycles)"
            )
        return self

    @property
    def gen_spec(self) -> GenSpec:
        """Generation spec with the experiment's minutes and seed."""
        return self.gen.model_copy(update={"minutes": self.n_minutes, "seed": self.seed})

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentSpec':
        return cls.model_validate(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "n_minutes": self.n_minutes,
            "train_minutes": self.train_minutes,
            "test_minutes": self.test_minutes,
            "split": self.split,
            "gen": self.gen_spec.to_dict(),
            "spoof_kind": self.spoof_kind.model_dump(),
            "window": self.window.model_dump(),
            "models": list(self.models),
            "train_cfg": self.train_cfg.to_dict(),
            "latency_run_len": self.latency_run_len,
        }


@dataclass
class ModelResult:
    """Test-minute outcome of one trained model."""

    confusion: Confusion
    ratios: Ratios
    latency: LatencyReport
    train_info: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "confusion": self.confusion.to_dict(),
            "ratios": self.ratios.to_dict(),
            "latency": self.latency.to_dict(),
            "train_info": self.train_info,
        }


@dataclass
class ExperimentReport:
    """
    Outcome of one experiment.

    to_dict() holds only deterministic content; wall-clock timings and in-memory
    artifacts (models, feature tables) are kept beside it.
    """

    config: Dict[str, Any]
    dataset_fingerprint: str
    row_counts: Dict[str, int]
    targets: Dict[int, str]
    train_minutes: List[int]
    test_minutes: List[int]
    standardizer: Standardizer
    results: Dict[str, ModelResult]
    constraint_violations: int = 0
    timings: Dict[str, float] = field(default_factory=dict)
    artifacts: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "config": self.config,
            "dataset_fingerprint": self.dataset_fingerprint,
            "row_counts": self.row_counts,
            "subsample_caps": {
                "svm": self.config["train_cfg"]["svm_subsample_cap"],
                "mlp": self.config["train_cfg"]["mlp_subsample_cap"],
            },
            "targets": {str(minute): pmu for minute, pmu in sorted(self.targets.items())},
            "train_minutes": self.train_minutes,
            "test_minutes": self.test_minutes,
            "constraint_violations": self.constraint_violations,
            "standardizer": self.standardizer.to_dict(),
            "models": {name: result.to_dict() for name, result in self.results.items()},
        }

    def to_text(self) -> str:
        kind = self.config["spoof_kind"]["kind"]
        columns = {f"{name.upper()} ({kind})": result.ratios for name, result in self.results.items()}
        latencies = {f"{name.upper()} ({kind})": result.latency for name, result in self.results.items()}
        header = (
            f"Dataset {self.dataset_fingerprint[:16]}  rows: train {self.row_counts['train']}, "
            f"test {self.row_counts['test']}\n"
        )
        return header + format_report_table(columns, latencies)


@dataclass
class PreparedData:
    """Spoofed recording and its minute-trimmed feature table."""

    dataset: Dataset
    spoofed: SpoofedDataset
    table: FeatureTable
    minutes: np.ndarray
    targets: Dict[int, str]
    constraint_violations: int


def dataset_fingerprint(dataset: Dataset) -> str:
    """SHA-256 over pmu ids, rate and sample bytes of every stream."""
    digest = hashlib.sha256()
    digest.update(str(dataset.rate_hz).encode("utf-8"))
    for stream in dataset.streams:
        digest.update(stream.pmu_id.encode("utf-8"))
        digest.update(np.ascontiguousarray(stream.samples, dtype="<f8").tobytes())
    return digest.hexdigest()


def _child_seeds(seed: int) -> Dict[str, int]:
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("targets", "split", "svm", "mlp")
    return {name: int(child.generate_state(1, np.uint64)[0]) for name, child in zip(names, children)}


class ExperimentHarness:
    """Runs experiments and writes their reports."""

    @contextmanager
    def _stage(self, name: str, timings: Dict[str, float]) -> Iterator[None]:
        logger.info(f"Stage {name} started")
        started = time.perf_counter()
        try:
            yield
        except ExperimentStageError:
            raise
        except Exception as e:
            logger.error(f"Stage {name} failed: {e}")
            raise ExperimentStageError(name, e) from e
        finally:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - started

    def prepare(self, spec: ExperimentSpec, workers: int, timings: Dict[str, float]) -> PreparedData:
        """Generate, spoof and extract; drop windows that cross a minute boundary."""
        seeds = _child_seeds(spec.seed)

        with self._stage("generate", timings):
            dataset = synth_generator.generate(spec.gen_spec)
            issues = pmu_store.find_drop_drift(dataset, min_run=spec.window.window_len)
            if issues:
                logger.warning(f"Generated recording has {len(issues)} drop/drift runs")

        with self._stage("spoof", timings):
            rng = np.random.Generator(np.random.PCG64(seeds["targets"]))
            params = spec.spoof_kind.model_dump(exclude={"kind"})
            specs, targets = [], {}
            for minute in range(spec.n_minutes):
                target = dataset.pmu_ids[int(rng.integers(len(dataset.streams)))]
                targets[minute] = target
                specs.append(spoofer.default_spec(dataset, target, spec.spoof_kind.kind, minute, **params))
            spoofed = spoofer.apply_all(dataset, specs)

            violations = 0
            for truth in specs:
                report = spoofer.check_constraints(dataset.stream(truth.target_pmu),
                                                   spoofed.data.stream(truth.target_pmu), truth)
                violations += len(report.violations)

        with self._stage("features", timings):
            table = extract(spoofed, spec.window, workers=workers)
            cycles_per_minute = dataset.cycles_per_minute
            table = table.select((table.cycle % cycles_per_minute) >= spec.window.window_len - 1)
            minutes = table.minute_of(cycles_per_minute)
            logger.info(f"{len(table)} feature rows after dropping minute-crossing windows")

        return PreparedData(dataset, spoofed, table, minutes, targets, violations)

    def _split_minutes(self, spec: ExperimentSpec) -> Tuple[List[int], List[int]]:
        if spec.split == "chronological":
            return list(range(spec.train_minutes)), list(range(spec.train_minutes, spec.n_minutes))
        rng = np.random.Generator(np.random.PCG64(_child_seeds(spec.seed)["split"]))
        test = sorted(int(m) for m in rng.choice(spec.n_minutes, size=spec.test_minutes, replace=False))
        return [m for m in range(spec.n_minutes) if m not in test], test

    def run(self, spec: ExperimentSpec, workers: int = 1) -> ExperimentReport:
        """
        Run one experiment end to end.

        Args:
            spec: Experiment definition; every random draw derives from spec.seed
            workers: Feature extraction processes (does not change the report)

        Returns:
            ExperimentReport
        """
        timings: Dict[str, float] = {}
        seeds = _child_seeds(spec.seed)
        prepared = self.prepare(spec, workers, timings)
        table, minutes = prepared.table, prepared.minutes

        with self._stage("split", timings):
            train_minutes, test_minutes = self._split_minutes(spec)
            train_rows = table.select(np.isin(minutes, train_minutes))
            test_rows = table.select(np.isin(minutes, test_minutes))
            standardizer = fit_standardizer(train_rows)
            train_std = standardizer.transform_table(train_rows)

        results: Dict[str, ModelResult] = {}
        models: Dict[str, Any] = {}
        test_truths = [t for t in prepared.spoofed.truths if t.onset_t // prepared.dataset.cycles_per_minute
                       in test_minutes]
        for name in spec.models:
            with self._stage(f"train_{name}", timings):
                cfg = spec.train_cfg.model_copy(update={"seed": seeds[name]})
                trainer = train_svm if name == "svm" else train_mlp
                model = trainer(train_std, cfg, standardizer=standardizer)
                models[name] = model

            with self._stage(f"evaluate_{name}", timings):
                _, predicted = predict_batch(model, test_rows.r)
                counts = confusion(predicted, test_rows.label)
                per_pair = latency_for_pairs(test_rows, predicted, test_truths,
                                             prepared.dataset.cycles_per_minute, spec.latency_run_len)
                results[name] = ModelResult(
                    confusion=counts,
                    ratios=ratios(counts),
                    latency=aggregate_latency(per_pair),
                    train_info=dict(model.train_info),
                )
                logger.info(f"{name}: F1 {results[name].ratios.f1}, min-of-max latency "
                            f"{results[name].latency.min_of_max}")

        return ExperimentReport(
            config=spec.to_dict(),
            dataset_fingerprint=dataset_fingerprint(prepared.spoofed.data),
            row_counts={
                "extracted": int(len(table)),
                "train": int(len(train_rows)),
                "test": int(len(test_rows)),
                "train_spoofed": train_rows.n_positive,
                "test_spoofed": test_rows.n_positive,
            },
            targets=prepared.targets,
            train_minutes=train_minutes,
            test_minutes=test_minutes,
            standardizer=standardizer,
            results=results,
            constraint_violations=prepared.constraint_violations,
            timings=timings,
            artifacts={"models": models, "train_rows": train_rows, "test_rows": test_rows,
                       "spoofed": prepared.spoofed},
        )

    def run_grid_search(self, spec: ExperimentSpec, c_grid: Sequence[float], gamma_grid: Sequence[float],
                        workers: int = 1) -> GridSearchResult:
        """
        Choose SVM (C, gamma) on the training minutes only.

        The training minutes are split chronologically into fit and validation parts,
        3/11 of them (at least one) for validation.
        """
        timings: Dict[str, float] = {}
        prepared = self.prepare(spec, workers, timings)

        with self._stage("gridsearch", timings):
            train_minutes, _ = self._split_minutes(spec)
            if len(train_minutes) < 2:
                raise ValueError("Grid search needs at least 2 training minutes")
            n_validate = min(len(train_minutes) - 1, max(1, round(len(train_minutes) * GRID_VALIDATION_SHARE)))
            fit_minutes, validate_minutes = train_minutes[:-n_validate], train_minutes[-n_validate:]

            fit_rows = prepared.table.select(np.isin(prepared.minutes, fit_minutes))
            validate_rows = prepared.table.select(np.isin(prepared.minutes, validate_minutes))
            standardizer = fit_standardizer(fit_rows)
            cfg = spec.train_cfg.model_copy(update={"seed": _child_seeds(spec.seed)["svm"]})
            return grid_search_svm(standardizer.transform_table(fit_rows), standardizer.transform_table(validate_rows),
                                   c_grid, gamma_grid, cfg)

    def load_spec(self, path: Union[str, Path]) -> ExperimentSpec:
        """Read an ExperimentSpec JSON document."""
        try:
            return ExperimentSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as e:
            logger.error(f"Error parsing experiment spec {path}: {e}")
            raise ValueError(f"Invalid experiment JSON in {path}: {e}") from e

    def write_report(self, report: ExperimentReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """
        Write report.json, report.txt and timings.json into out_dir.

        Returns:
            Paths of the written files
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report.json": out / "report.json",
            "report.txt": out / "report.txt",
            "timings.json": out / "timings.json",
        }
        try:
            paths["report.json"].write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
            paths["report.txt"].write_text(report.to_text(), encoding="utf-8")
            paths["timings.json"].write_text(json.dumps(report.timings, indent=2) + "\n", encoding="utf-8")
            logger.info(f"Wrote report to {out}")
            return paths
        except Exception as e:
            logger.error(f"Error writing report to {out}: {e}")
            raise


# Global harness instance
experiment_harness = ExperimentHarness()
