"""
Command-line interface for the PMU spoof-detection pipeline.

Usage:
    python terminal_app/cli.py [--seed N] [--config FILE] [--out DIR] [--workers N] COMMAND [ARGS]

Commands:
    synth       Generate a synthetic recording (dataset.csv)
    spoof       Spoof a recording (spoofed.csv + truth.json)
    features    Extract correlation features (features.csv)
    train       Train an SVM or MLP on a feature file (model_<kind>.json)
    eval        Score a model on a feature file (eval.json + eval.txt)
    e2e         Run a whole experiment (report.json + report.txt + timings.json)
    gridsearch  Search SVM (C, gamma) on the training minutes (gridsearch.json)

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console

# Add the project root to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config.settings import settings
from core.classifiers import TrainConfig, load_model, predict_batch, save_model, train_mlp, train_svm
from core.features import WindowConfig, extract, fit_standardizer, load_features, save_features
from core.harness import ExperimentSpec, ExperimentStageError, experiment_harness
from core.metrics import aggregate_latency, confusion, format_report_table, latency_for_pairs, ratios
from core.models import SpoofedDataset, SpoofSpec
from core.pmu_store import pmu_store
from core.spoofer import spoofer
from core.synth_gen import PROFILE_PRESETS, GenSpec, synth_generator

logger = logging.getLogger(__name__)
console = Console(highlight=False)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: {e}") from e


def _out_dir(ctx: click.Context) -> Path:
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_grid(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from e


def _experiment_spec(ctx: click.Context) -> ExperimentSpec:
    path = ctx.obj["config"] or settings.DEFAULT_EXPERIMENT_FILE
    data = _read_json(path)
    if ctx.obj["seed"] is not None:
        data["seed"] = ctx.obj["seed"]
    return ExperimentSpec.from_dict(data)


@click.group()
@click.option("--seed", type=int, default=None, help="Seed for every random draw (default from PMU_SEED)")
@click.option("--config", "config_path", type=str, default=None, help="JSON configuration document")
@click.option("--out", type=str, default=None, help="Output directory")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Feature extraction processes")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=None, help="Logging level (default from LOG_LEVEL)")
@click.pass_context
def main(ctx: click.Context, seed: Optional[int], config_path: Optional[str], out: Optional[str],
         workers: Optional[int], log_level: Optional[str]):
    """PMU spoof detection from pairwise correlation features."""
    logging.basicConfig(
        level=getattr(logging, (log_level or settings.LOG_LEVEL).upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )
    settings.validate()
    ctx.ensure_object(dict)
    ctx.obj.update({
        "seed": seed,
        "config": config_path,
        "out": out or settings.OUTPUT_DIR,
        "workers": workers or settings.WORKERS,
    })


@main.command()
@click.option("--n-pmus", type=click.IntRange(min=2), default=None, help="Number of PMUs")
@click.option("--minutes", type=click.IntRange(min=1), default=None, help="Recording length in minutes")
@click.option("--profile", type=click.Choice(sorted(PROFILE_PRESETS)), default=None, help="Correlation preset")
@click.pass_context
def synth(ctx: click.Context, n_pmus: Optional[int], minutes: Optional[int], profile: Optional[str]):
    """Generate a synthetic recording; --config is read as a GenSpec."""
    data = _read_json(ctx.obj["config"]) if ctx.obj["config"] else {}
    overrides = {"n_pmus": n_pmus, "minutes": minutes, "profile": profile, "seed": ctx.obj["seed"]}
    data.update({k: v for k, v in overrides.items() if v is not None})
    data.setdefault("seed", settings.SEED)
    data.setdefault("rate_hz", settings.RATE_HZ)
    spec = GenSpec.from_dict(data)

    dataset = synth_generator.generate(spec)
    path = _out_dir(ctx) / "dataset.csv"
    pmu_store.save_csv(dataset, path)
    console.print(f"Wrote {len(dataset.streams)} PMUs x {dataset.n_cycles} cycles to {path}")


@main.command()
@click.option("--input", "input_path", required=True, help="Recording CSV")
@click.option("--spec", "spec_path", default=None, help="SpoofSpec JSON (object or list)")
@click.option("--kind", type=click.Choice(["rlv", "mirror", "dilation"]), default="rlv")
@click.option("--target", default=None, help="Target pmu_id (default: first PMU)")
@click.option("--minute", type=click.IntRange(min=0), default=0, help="Minute whose last 30 s are spoofed")
@click.option("--factor", type=float, default=None, help="Time-dilation factor")
@click.option("--history-len", "history_len_u", type=click.IntRange(min=1), default=None,
              help="Mirror history length u")
@click.pass_context
def spoof(ctx: click.Context, input_path: str, spec_path: Optional[str], kind: str, target: Optional[str],
          minute: int, factor: Optional[float], history_len_u: Optional[int]):
    """Spoof one PMU of a recording and write the ground truth sidecar."""
    dataset = pmu_store.load_csv(input_path, rate_hz=settings.RATE_HZ)
    if spec_path:
        specs = pmu_store.load_spoof_truth(spec_path)
    else:
        specs = [spoofer.default_spec(dataset, target or dataset.pmu_ids[0], kind, minute,
                                      factor=factor, history_len_u=history_len_u)]

    spoofed = spoofer.apply_all(dataset, specs)
    for spec in specs:
        spoofer.check_constraints(dataset.stream(spec.target_pmu), spoofed.data.stream(spec.target_pmu), spec)

    out = _out_dir(ctx)
    pmu_store.save_csv(spoofed.data, out / "spoofed.csv")
    pmu_store.save_spoof_truth(specs, out / "truth.json")
    console.print(f"Wrote {out / 'spoofed.csv'} and {out / 'truth.json'} ({len(specs)} spoof(s))")


@main.command()
@click.option("--input", "input_path", required=True, help="Recording CSV")
@click.option("--truth", "truth_path", default=None, help="Spoof truth JSON for labels")
@click.option("--window-len", type=click.IntRange(min=2), default=None, help="Window length in cycles")
@click.option("--step", type=click.IntRange(min=1), default=1, help="Window step in cycles")
@click.pass_context
def features(ctx: click.Context, input_path: str, truth_path: Optional[str], window_len: Optional[int], step: int):
    """Extract pairwise sliding-window correlation features."""
    dataset = pmu_store.load_csv(input_path, rate_hz=settings.RATE_HZ)
    cfg = WindowConfig(window_len=window_len or settings.WINDOW_LEN, step=step)

    for issue in pmu_store.find_drop_drift(dataset, min_run=cfg.window_len):
        logger.warning(f"{issue.kind} on {issue.pmu_id}/{issue.signal.value} at cycle {issue.start} "
                       f"for {issue.length} cycles")

    source = dataset
    if truth_path:
        source = SpoofedDataset(dataset, tuple(pmu_store.load_spoof_truth(truth_path)))
    table = extract(source, cfg, workers=ctx.obj["workers"])

    path = _out_dir(ctx) / "features.csv"
    save_features(table, path)
    console.print(f"Wrote {len(table)} feature rows ({table.n_positive} spoofed) to {path}")


@main.command()
@click.option("--features", "features_path", required=True, help="Feature CSV")
@click.option("--model", "model_kind", type=click.Choice(["svm", "mlp"]), default="svm")
@click.option("--c", "c_param", type=float, default=None, help="SVM C")
@click.option("--gamma", type=float, default=None, help="SVM gamma")
@click.option("--epochs", type=click.IntRange(min=1), default=None, help="MLP epochs")
@click.pass_context
def train(ctx: click.Context, features_path: str, model_kind: str, c_param: Optional[float],
          gamma: Optional[float], epochs: Optional[int]):
    """Fit a standardizer and train one model on every row of a feature file; --config is a TrainConfig."""
    data = _read_json(ctx.obj["config"]) if ctx.obj["config"] else {}
    overrides = {"c_param": c_param, "gamma": gamma, "epochs": epochs, "seed": ctx.obj["seed"]}
    data.update({k: v for k, v in overrides.items() if v is not None})
    data.setdefault("seed", settings.SEED)
    data.setdefault("svm_subsample_cap", settings.SVM_SUBSAMPLE_CAP)
    data.setdefault("mlp_subsample_cap", settings.MLP_SUBSAMPLE_CAP)
    cfg = TrainConfig.from_dict(data)

    table = load_features(features_path)
    standardizer = fit_standardizer(table)
    trainer = train_svm if model_kind == "svm" else train_mlp
    model = trainer(standardizer.transform_table(table), cfg, standardizer=standardizer)

    path = _out_dir(ctx) / f"model_{model_kind}.json"
    save_model(model, path)
    console.print(f"Wrote {model_kind} model to {path}")


@main.command(name="eval")
@click.option("--features", "features_path", required=True, help="Feature CSV")
@click.option("--model", "model_path", required=True, help="Model JSON")
@click.option("--truth", "truth_path", default=None, help="Spoof truth JSON for latency")
@click.option("--run-len", type=click.IntRange(min=1), default=None, help="Positive run that marks detection")
@click.pass_context
def evaluate(ctx: click.Context, features_path: str, model_path: str, truth_path: Optional[str],
             run_len: Optional[int]):
    """Score a trained model on a feature file."""
    table = load_features(features_path)
    model = load_model(model_path)
    _, predicted = predict_batch(model, table.r)
    counts = confusion(predicted, table.label)
    result = {"confusion": counts.to_dict(), "ratios": ratios(counts).to_dict()}

    latencies = None
    if truth_path:
        truths = pmu_store.load_spoof_truth(truth_path)
        per_pair = latency_for_pairs(table, predicted, truths, settings.RATE_HZ * 60,
                                     run_len or settings.LATENCY_RUN_LEN)
        if per_pair:
            report = aggregate_latency(per_pair)
            result["latency"] = report.to_dict()
            latencies = {model.kind.upper(): report}

    out = _out_dir(ctx)
    (out / "eval.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    text = format_report_table({model.kind.upper(): ratios(counts)}, latencies)
    (out / "eval.txt").write_text(text, encoding="utf-8")
    console.print(text)


@main.command()
@click.pass_context
def e2e(ctx: click.Context):
    """Run a whole experiment from an ExperimentSpec (--config, default config/default_experiment.json)."""
    spec = _experiment_spec(ctx)
    report = experiment_harness.run(spec, workers=ctx.obj["workers"])
    paths = experiment_harness.write_report(report, _out_dir(ctx))
    console.print(report.to_text())
    console.print(f"Wrote {', '.join(str(p) for p in paths.values())}")


@main.command()
@click.option("--c-grid", default="0.1,1,10", help="Comma-separated C values")
@click.option("--gamma-grid", default="0.05,0.2,1", help="Comma-separated gamma values")
@click.pass_context
def gridsearch(ctx: click.Context, c_grid: str, gamma_grid: str):
    """Grid-search SVM (C, gamma) on the training minutes of an experiment."""
    spec = _experiment_spec(ctx)
    result = experiment_harness.run_grid_search(spec, _parse_grid(c_grid), _parse_grid(gamma_grid),
                                                workers=ctx.obj["workers"])
    path = _out_dir(ctx) / "gridsearch.json"
    path.write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
    console.print(f"Best C={result.c_param}, gamma={result.gamma} (F1 {result.best_f1:.4f}); wrote {path}")


def _is_data_error(error: BaseException) -> bool:
    if isinstance(error, ExperimentStageError):
        error = error.cause
    return isinstance(error, (ValueError, OSError))


def cli(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI and map failures to exit codes.

    Args:
        argv: Arguments without the program name (default sys.argv[1:])

    Returns:
        0 success, 1 usage error, 2 data error, 3 internal error
    """
    try:
        main.main(args=argv, prog_name="pmu-spoof", standalone_mode=False)
        return EXIT_OK
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except Exception as e:
        if _is_data_error(e):
            logger.error(f"Data error: {e}")
            click.echo(f"Error: {e}", err=True)
            return EXIT_DATA
        logger.exception(f"Internal error: {e}")
        click.echo(f"Internal error: {e}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(cli())
