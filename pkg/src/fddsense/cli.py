"""Command line front end.

Subcommands cover the full study (pipeline) and its stages in isolation:
data synthesis, model training, importance ranking, greedy sensor-set
selection, and noise/failure robustness checks.  All output is plain text
on stdout; artifact files land in the requested directory.
"""

from __future__ import annotations

import dataclasses
import math
import sys

import click

from .dataset import load_dataset, split_train_test, write_csv
from .ensembles import (
    EnsembleConfig,
    evaluate,
    feature_importance,
    fit_ensemble,
    load_model,
    rank_features,
    save_model,
)
from .errors import FddError
from .fileio import atomic_write_text, write_csv_rows, write_json
from .pipeline import parse_config, run_pipeline, _chart_svg
from .robustness import AWGN, FAILURE, NoiseSpec, run_scenarios
from .seeding import derive_seed
from .selection import RfaConfig, run_rfa
from .simgen import GeneratorConfig, generate_dataset
from .trees import TreeConfig


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(f"{type(exc).__name__}: {exc}")


def _parse_snr_list(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}")
    if not levels or any(not math.isfinite(v) for v in levels):
        raise click.BadParameter(f"expected finite SNR values, got {text!r}")
    return levels


def _tree_config(max_depth, min_leaf, feature_subsample, split_strategy, histogram_bins, n_sensors):
    if feature_subsample == "sqrt":
        subsample = max(1, math.isqrt(n_sensors))
    elif feature_subsample in ("all", "none", ""):
        subsample = None
    else:
        try:
            subsample = int(feature_subsample)
        except ValueError:
            raise click.BadParameter(
                f'feature subsample must be an int, "sqrt", or "all", got {feature_subsample!r}'
            )
    return TreeConfig(
        max_depth=max_depth,
        min_leaf=min_leaf,
        feature_subsample=subsample,
        split_strategy=split_strategy,
        histogram_bins=histogram_bins,
    )


_ensemble_options = [
    click.option("--method", type=click.Choice(["bagging", "boosting"]), default="bagging", show_default=True),
    click.option("--trees", type=int, default=25, show_default=True, help="Trees (bagging) or rounds (boosting)."),
    click.option("--max-depth", type=int, default=12, show_default=True),
    click.option("--min-leaf", type=int, default=5, show_default=True),
    click.option("--feature-subsample", default="sqrt", show_default=True, help='Per-node feature subset size, "sqrt", or "all".'),
    click.option("--split-strategy", type=click.Choice(["exact", "histogram"]), default="exact", show_default=True),
    click.option("--histogram-bins", type=int, default=64, show_default=True),
    click.option("--bootstrap/--no-bootstrap", default=True, show_default=True),
    click.option("--learning-rate", type=float, default=0.3, show_default=True),
    click.option("--hard-vote", is_flag=True, help="Majority voting instead of distribution averaging (bagging)."),
]


def _with_ensemble_options(fn):
    for option in reversed(_ensemble_options):
        fn = option(fn)
    return fn


def _build_ensemble(n_sensors, method, trees, max_depth, min_leaf, feature_subsample,
                    split_strategy, histogram_bins, bootstrap, learning_rate, hard_vote):
    tree = _tree_config(max_depth, min_leaf, feature_subsample, split_strategy, histogram_bins, n_sensors)
    return EnsembleConfig(
        method=method,
        n_trees=trees,
        tree=tree,
        bootstrap=bootstrap,
        learning_rate=learning_rate,
        hard_vote=hard_vote,
    )


@click.group()
def main():
    """Fault detection studies for the 40-sensor refrigeration schema."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file.")
@click.option("--data", "data_path", type=click.Path(), default=None, help="Input CSV; omit to use the generator.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Artifact directory.")
@click.option("--rows", type=int, default=None, help="Generator row count.")
@click.option("--trees", type=int, default=None)
@click.option("--threshold", type=float, default=None, help="Clean macro-F1 stopping threshold.")
@click.option("--train-fraction", type=float, default=None)
@click.option("--snr", default=None, help="Comma-separated SNR levels in dB, e.g. 10,3,0.")
@click.option("--no-failure", is_flag=True, help="Skip the dead-sensor scenario.")
@click.option("--threads", type=int, default=None)
def pipeline(config_path, data_path, seed, out_dir, rows, trees, threshold,
             train_fraction, snr, no_failure, threads):
    """Run the full study and write all artifacts."""
    overrides: dict = {
        "data_path": data_path,
        "seed": seed,
        "out_dir": out_dir,
        "n_trees": trees,
        "train_fraction": train_fraction,
        "n_threads": threads,
    }
    if rows is not None:
        overrides["generator"] = {"n_rows": rows}
    if snr is not None:
        overrides["snr_levels"] = list(_parse_snr_list(snr))
    if no_failure:
        overrides["include_failure"] = False
    try:
        cfg = parse_config(config_path, overrides)
        if threshold is not None:
            cfg = dataclasses.replace(cfg, rfa=dataclasses.replace(cfg.rfa, threshold=threshold))
        result = run_pipeline(cfg)
    except (FddError, OSError) as exc:
        raise _fail(exc)
    trace = result.trace
    click.echo(
        f"test rows: {int(result.report.support.sum())} selected sensors: {len(trace.selected)}"
    )
    click.echo("selected: " + ", ".join(trace.selected))
    click.echo(f"clean macro-F1: {result.report.macro_f1:.4f} (threshold {trace.threshold:g}, met: {trace.threshold_met})")
    for row in result.robustness.scenarios:
        tag = row.spec.label()
        click.echo(f"{tag}: macro-F1 {row.macro_f1:.4f}")
    click.echo(f"artifacts: {result.out_dir}")


@main.command()
@click.option("--out", "out_path", type=click.Path(), required=True, help="Destination CSV.")
@click.option("--rows", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def simgen(out_path, rows, seed):
    """Generate a synthetic labelled dataset CSV."""
    try:
        data = generate_dataset(GeneratorConfig(n_rows=rows), seed)
        write_csv(data, out_path)
    except (FddError, OSError) as exc:
        raise _fail(exc)
    click.echo(f"wrote {data.n_rows} rows x {data.n_sensors} sensors to {out_path}")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--model-out", type=click.Path(), default="model.json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_with_ensemble_options
def train(data_path, model_out, seed, **ensemble_kwargs):
    """Fit an ensemble on a CSV and save it as JSON."""
    try:
        data = load_dataset(data_path)
        cfg = _build_ensemble(data.n_sensors, **ensemble_kwargs)
        model = fit_ensemble(
            data.values, data.labels, cfg, derive_seed(seed, "model"), data.symbols
        )
        report = evaluate(model, data)
        save_model(model, model_out)
    except (FddError, OSError) as exc:
        raise _fail(exc)
    click.echo(f"trained {cfg.method} on {data.n_rows} rows x {data.n_sensors} sensors")
    click.echo(f"training macro-F1: {report.macro_f1:.4f}")
    click.echo(f"model: {model_out}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--mode", type=click.Choice(["impurity", "gain"]), default="impurity", show_default=True)
@click.option("--top", type=int, default=None, help="Show only the top N sensors.")
def importance(model_path, mode, top):
    """Print a model's per-sensor importance ranking."""
    try:
        model = load_model(model_path)
        ranking = rank_features(model, mode=mode)
    except (FddError, OSError) as exc:
        raise _fail(exc)
    if top is not None:
        ranking = ranking[:top]
    width = max(len(s) for s, _ in ranking)
    for rank, (sensor, value) in enumerate(ranking, start=1):
        click.echo(f"{rank:3d}  {sensor:<{width}}  {value:.6f}")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threshold", type=float, default=0.99, show_default=True)
@click.option("--max-sensors", type=int, default=None)
@click.option("--snr-probe", type=float, default=3.0, show_default=True, help="SNR of the per-step noise probe (dB).")
@click.option("--train-fraction", type=float, default=0.75, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Write trace artifacts here.")
@_with_ensemble_options
def rfa(data_path, seed, threshold, max_sensors, snr_probe, train_fraction, out_dir, **ensemble_kwargs):
    """Rank sensors, then grow the smallest set meeting the threshold."""
    try:
        data = load_dataset(data_path)
        pair = split_train_test(data, train_fraction, seed=derive_seed(seed, "split"))
        cfg = _build_ensemble(data.n_sensors, **ensemble_kwargs)
        rfa_cfg = RfaConfig(threshold=threshold, max_sensors=max_sensors, noise_snr_db=snr_probe)
        trace = run_rfa(pair.train, pair.test, cfg, derive_seed(seed, "model"), rfa_cfg)
    except (FddError, OSError) as exc:
        raise _fail(exc)
    for step in trace.steps:
        click.echo(
            f"k={step.sensor_count:2d} +{step.added_sensor:<8s} "
            f"clean={step.clean_f1:.4f} noisy={step.noisy_f1:.4f}"
        )
    click.echo(f"threshold {trace.threshold:g} met: {trace.threshold_met}")
    click.echo("selected: " + ", ".join(trace.selected))
    if out_dir is not None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "rfa_trace.json", trace.to_json_dict())
        write_csv_rows(out / "rfa_trace.csv", trace.to_csv_rows())
        atomic_write_text(out / "rfa_curves.svg", _chart_svg(trace))
        click.echo(f"artifacts: {out}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--sensor", default=None, help="Target sensor; default: the model's top-ranked one.")
@click.option("--snr", default="10,3,0", show_default=True, help="Comma-separated SNR levels in dB.")
@click.option("--fail-sensor", is_flag=True, help="Also test the sensor stuck at zero.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Write robustness artifacts here.")
def robustness(model_path, data_path, sensor, snr, fail_sensor, seed, out_dir):
    """Score a saved model under noise and dead-sensor scenarios."""
    levels = _parse_snr_list(snr)
    try:
        model = load_model(model_path)
        data = load_dataset(data_path)
        if sensor is None:
            sensor = rank_features(model)[0][0]
        specs = [NoiseSpec(sensor=sensor, mode=AWGN, snr_db=v) for v in levels]
        if fail_sensor:
            specs.append(NoiseSpec(sensor=sensor, mode=FAILURE))
        report = run_scenarios(model, data, specs, derive_seed(seed, "robustness"))
    except (FddError, OSError) as exc:
        raise _fail(exc)
    click.echo(f"baseline: macro-F1 {report.baseline.macro_f1:.4f}")
    for row in report.scenarios:
        measured = "" if not math.isfinite(row.measured_snr_db) else f" (measured {row.measured_snr_db:.2f} dB)"
        click.echo(f"{row.spec.label()}: macro-F1 {row.macro_f1:.4f}{measured}")
    if out_dir is not None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "robustness.json", report.to_json_dict())
        write_csv_rows(out / "robustness.csv", report.to_csv_rows())
        click.echo(f"artifacts: {out}")


if __name__ == "__main__":
    sys.exit(main())
