"""
Throughput benchmarks for correlation feature extraction.

Measures:
1. CPU time of one pair-signal sliding correlation over one minute (window 300, step 1)
2. Wall-clock extraction time of the 10-PMU workload with 1 and 4 workers
3. The real-time core estimate that follows from (1)

Usage:
    python scripts/run_benchmarks.py [--minutes N] [--workers N]
"""

import sys
import time
import logging
from pathlib import Path

import click
import numpy as np
from rich.console import Console
from rich.table import Table

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config.settings import settings
from core.features import WindowConfig, extract, realtime_cores, sliding_pearson
from core.models import FEATURE_SIGNALS, SignalKind, pair_indices
from core.synth_gen import GenSpec, synth_generator

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)
console = Console()


def time_single_correlation(repeats: int = 5) -> float:
    """Best-of CPU seconds for one pair-signal correlation over one minute."""
    dataset = synth_generator.generate(GenSpec(n_pmus=2, minutes=1, seed=settings.SEED))
    x = dataset.streams[0].signal(SignalKind.PHI_POS)
    y = dataset.streams[1].signal(SignalKind.PHI_POS)

    best = float("inf")
    for _ in range(repeats):
        started = time.process_time()
        sliding_pearson(x, y, WindowConfig())
        best = min(best, time.process_time() - started)
    return best


def time_extraction(minutes: int, workers: int) -> float:
    """Wall-clock seconds to extract the 10-PMU feature table."""
    dataset = synth_generator.generate(GenSpec(n_pmus=10, minutes=minutes, seed=settings.SEED))
    started = time.perf_counter()
    extract(dataset, WindowConfig(), workers=workers)
    return time.perf_counter() - started


@click.command()
@click.option("--minutes", type=click.IntRange(min=1), default=14, help="Recording length for scaling runs")
@click.option("--workers", type=click.IntRange(min=2), default=4, help="Parallel worker count to compare")
def main(minutes: int, workers: int):
    """Run the throughput benchmarks and print a summary."""
    try:
        settings.validate()

        single = time_single_correlation()
        n_correlations = len(pair_indices(10)) * len(FEATURE_SIGNALS)
        serial = time_extraction(minutes, 1)
        parallel = time_extraction(minutes, workers)
        speedup = serial / parallel if parallel > 0 else float("nan")

        table = Table(title="Feature extraction throughput")
        table.add_column("Measure")
        table.add_column("Value", justify="right")
        table.add_row("One pair-signal, 1 minute (CPU s)", f"{single:.3f}")
        table.add_row(f"10 PMUs, {minutes} min, 1 worker (s)", f"{serial:.2f}")
        table.add_row(f"10 PMUs, {minutes} min, {workers} workers (s)", f"{parallel:.2f}")
        table.add_row("Speedup", f"{speedup:.2f}x")
        table.add_row(f"Cores for {n_correlations} real-time correlations", str(realtime_cores(single, n_correlations)))
        console.print(table)

        ok = single <= 2.0 and speedup >= 3.0
        if not ok:
            logger.warning("Throughput below target (<= 2 s per pair-signal minute, >= 3x speedup)")
        return ok

    except Exception as e:
        logger.error(f"Benchmark failed: {e}")
        console.print(f"\nBenchmark failed: {e}")
        return False


if __name__ == "__main__":
    success = main(standalone_mode=False)
    sys.exit(0 if success else 1)
