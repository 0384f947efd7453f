"""
Seeded replicate experiments for all three spoof kinds.

For each seed and each spoof kind this runs the full experiment and collects
F1, specificity and min-of-max latency for both models, then checks the
detection targets:
- F1 >= 0.90 for RLV and Mirror, >= 0.80 for Time-Dilation
- Specificity >= 98%
- Min-of-max latency finite and at most 600 cycles
- Time-Dilation latency >= RLV latency in at least 2 of the replicates

Usage:
    python scripts/run_replicates.py [--config FILE] [--seeds 42,43,44] [--workers N] [--out DIR]
"""

import json
import sys
import logging
from pathlib import Path
from typing import Dict, List, Optional

import click
from rich.console import Console
from rich.table import Table

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config.settings import settings
from core.harness import ExperimentSpec, experiment_harness

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)
console = Console()

KINDS = ("rlv", "mirror", "dilation")
F1_TARGET = {"rlv": 0.90, "mirror": 0.90, "dilation": 0.80}
SPECIFICITY_TARGET = 98.0
LATENCY_LIMIT = 600


def run_replicate(base: Dict, seed: int, kind: str, workers: int, out: Optional[Path]) -> Dict[str, Dict]:
    """Run one (seed, kind) experiment and return per-model summaries."""
    spec = ExperimentSpec.from_dict({**base, "seed": seed, "spoof_kind": {"kind": kind}})
    report = experiment_harness.run(spec, workers=workers)
    if out is not None:
        experiment_harness.write_report(report, out / f"seed{seed}_{kind}")

    return {
        name: {
            "f1": result.ratios.f1,
            "specificity": result.ratios.specificity,
            "min_of_max": result.latency.min_of_max,
        }
        for name, result in report.results.items()
    }


@click.command()
@click.option("--config", "config_path", default=None, help="Base ExperimentSpec JSON")
@click.option("--seeds", default="42,43,44", help="Comma-separated replicate seeds")
@click.option("--workers", type=click.IntRange(min=1), default=settings.WORKERS)
@click.option("--out", default=None, help="Directory for per-run reports")
def main(config_path: Optional[str], seeds: str, workers: int, out: Optional[str]):
    """Run the replicates and print the detection/latency summary."""
    try:
        settings.validate()
        base = json.loads(Path(config_path or settings.DEFAULT_EXPERIMENT_FILE).read_text(encoding="utf-8"))
        seed_list: List[int] = [int(s) for s in seeds.split(",") if s.strip()]
        out_dir = Path(out) if out else None

        summaries = {}
        for seed in seed_list:
            for kind in KINDS:
                logger.info(f"Running replicate seed={seed} kind={kind}")
                summaries[(seed, kind)] = run_replicate(base, seed, kind, workers, out_dir)

        table = Table(title="Replicate summary")
        for column in ("Seed", "Kind", "Model", "F1", "Specificity", "Min-of-max latency"):
            table.add_column(column)

        failures = []
        for (seed, kind), models in summaries.items():
            for name, summary in models.items():
                f1, spec_pct, latency = summary["f1"], summary["specificity"], summary["min_of_max"]
                table.add_row(str(seed), kind, name, f"{f1:.4f}" if f1 is not None else "n/a",
                              f"{spec_pct:.2f}%" if spec_pct is not None else "n/a",
                              "never" if latency is None else str(latency))
                if f1 is None or f1 < F1_TARGET[kind]:
                    failures.append(f"seed {seed} {kind} {name}: F1 {f1}")
                if spec_pct is None or spec_pct < SPECIFICITY_TARGET:
                    failures.append(f"seed {seed} {kind} {name}: specificity {spec_pct}")
                if latency is None or latency > LATENCY_LIMIT:
                    failures.append(f"seed {seed} {kind} {name}: min-of-max latency {latency}")
        console.print(table)

        for name in ("svm", "mlp"):
            slower = 0
            for seed in seed_list:
                rlv = summaries[(seed, "rlv")].get(name, {}).get("min_of_max")
                dilation = summaries[(seed, "dilation")].get(name, {}).get("min_of_max")
                if rlv is not None and (dilation is None or dilation >= rlv):
                    slower += 1
            console.print(f"{name}: dilation latency >= RLV latency in {slower}/{len(seed_list)} replicates")
            if len(seed_list) >= 3 and slower < 2:
                failures.append(f"{name}: dilation not slower to detect than RLV")

        console.print("\n" + "=" * 50)
        if failures:
            console.print("REPLICATE TARGETS MISSED")
            console.print("=" * 50)
            for failure in failures:
                console.print(f"✗ {failure}")
        else:
            console.print("ALL REPLICATE TARGETS MET")
        console.print("=" * 50)
        return not failures

    except Exception as e:
        logger.error(f"Replicates failed: {e}")
        console.print(f"\nReplicates failed: {e}")
        return False


if __name__ == "__main__":
    success = main(standalone_mode=False)
    sys.exit(0 if success else 1)
