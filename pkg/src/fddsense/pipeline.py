"""End-to-end study runner: data to ranked sensors to robustness artifacts.

One run loads (or generates) a dataset, rebalances it, splits it, ranks
all sensors with a full-sensor ensemble, shrinks the sensor set by
recursive feature addition, retrains on the selected set, and probes that
final model against noise and a dead top sensor.  Every stage draws its
randomness from a seed derived from (master seed, stage name), so a run
is one pure function of (config, seed) and its artifact files are
byte-identical across repeats, platforms, and thread counts.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import load_dataset, split_train_test, undersample_majority
from .ensembles import (
    EnsembleConfig,
    EnsembleModel,
    evaluate,
    fit_ensemble,
    model_to_dict,
    rank_features,
)
from .errors import ConfigParseError, InvalidValueError
from .fileio import atomic_write_text, write_csv_rows, write_json
from .metrics import ClassReport
from .robustness import AWGN, FAILURE, NoiseSpec, RobustnessReport, run_scenarios
from .seeding import derive_seed
from .selection import RfaConfig, RfaTrace, run_rfa
from .simgen import GeneratorConfig, generate_dataset
from .trees import TreeConfig

OUT_DIR_ENV = "FDDSENSE_OUT_DIR"

DEFAULT_SNR_LEVELS = (10.0, 3.0, 0.0)


@dataclass(frozen=True)
class PipelineConfig:
    """Fully resolved settings for one run.

    data_path of None means the built-in generator supplies the data.
    feature_subsample accepts an int, None (all features), or "sqrt"
    (square root of the full sensor count, resolved once per run).
    """

    seed: int = 0
    data_path: str | None = None
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train_fraction: float = 0.75
    undersample: bool = True
    method: str = "bagging"
    n_trees: int = 25
    max_depth: int | None = 12
    min_leaf: int = 5
    feature_subsample: int | str | None = "sqrt"
    split_strategy: str = "exact"
    histogram_bins: int = 64
    bootstrap: bool = True
    learning_rate: float = 0.3
    hard_vote: bool = False
    rfa: RfaConfig = field(default_factory=RfaConfig)
    snr_levels: tuple[float, ...] = DEFAULT_SNR_LEVELS
    include_failure: bool = True
    out_dir: str = "fdd-out"
    n_threads: int = 1

    def __post_init__(self):
        if isinstance(self.feature_subsample, str) and self.feature_subsample != "sqrt":
            raise InvalidValueError(
                f'feature_subsample must be an int, null, or "sqrt", got {self.feature_subsample!r}'
            )
        if self.n_threads < 1:
            raise InvalidValueError("n_threads must be >= 1")
        for level in self.snr_levels:
            if not math.isfinite(level):
                raise InvalidValueError(f"snr level {level!r} is not finite")
        object.__setattr__(self, "snr_levels", tuple(float(v) for v in self.snr_levels))

    def ensemble_config(self, n_sensors: int) -> EnsembleConfig:
        subsample = self.feature_subsample
        if subsample == "sqrt":
            subsample = max(1, int(math.isqrt(n_sensors)))
        tree = TreeConfig(
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            feature_subsample=subsample,
            split_strategy=self.split_strategy,
            histogram_bins=self.histogram_bins,
        )
        return EnsembleConfig(
            method=self.method,
            n_trees=self.n_trees,
            tree=tree,
            bootstrap=self.bootstrap,
            learning_rate=self.learning_rate,
            hard_vote=self.hard_vote,
        )

    def to_json_dict(self) -> dict:
        """Echo of the study parameters.  Placement and parallelism knobs
        (out_dir, n_threads) are omitted: they cannot affect results, so
        the echo is byte-stable across destinations and thread counts."""
        gen = self.generator
        return {
            "seed": self.seed,
            "data": {
                "path": self.data_path,
                "generator": {
                    "n_rows": gen.n_rows,
                    "class_proportions": list(gen.class_proportions),
                },
            },
            "train_fraction": self.train_fraction,
            "undersample": self.undersample,
            "ensemble": {
                "method": self.method,
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "min_leaf": self.min_leaf,
                "feature_subsample": self.feature_subsample,
                "split_strategy": self.split_strategy,
                "histogram_bins": self.histogram_bins,
                "bootstrap": self.bootstrap,
                "learning_rate": self.learning_rate,
                "hard_vote": self.hard_vote,
            },
            "rfa": {
                "threshold": self.rfa.threshold,
                "max_sensors": self.rfa.max_sensors,
                "noise_snr_db": self.rfa.noise_snr_db,
                "importance_mode": self.rfa.importance_mode,
            },
            "robustness": {
                "snr_db": list(self.snr_levels),
                "include_failure": self.include_failure,
            },
        }


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise InvalidValueError(f"unknown key(s) {unknown} in {where} config")


def parse_config(path: str | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Resolve a PipelineConfig from defaults, env, file, and overrides.

    Precedence, lowest to highest: built-in defaults, the FDDSENSE_OUT_DIR
    environment variable (output directory only), the JSON config file,
    then explicit overrides (CLI flags).  Unknown keys anywhere are
    rejected rather than ignored.

    Raises:
        ConfigParseError: file unreadable or not valid JSON (the message
            carries line and column).
        InvalidValueError: unknown keys or out-of-range values.
    """
    merged: dict = {}
    env_out = os.environ.get(OUT_DIR_ENV)
    if env_out:
        merged["out_dir"] = env_out

    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(f"cannot read config file {path}: {exc}") from exc
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(
                f"config file {path} is not valid JSON: {exc.msg} "
                f"at line {exc.lineno} column {exc.colno}"
            ) from exc
        if not isinstance(loaded, dict):
            raise ConfigParseError(f"config file {path} must hold a JSON object")
        _reject_unknown(
            loaded,
            {
                "seed",
                "data",
                "train_fraction",
                "undersample",
                "ensemble",
                "rfa",
                "robustness",
                "out_dir",
                "n_threads",
            },
            "top-level",
        )
        for key in ("seed", "train_fraction", "undersample", "out_dir", "n_threads"):
            if key in loaded:
                merged[key] = loaded[key]
        if "data" in loaded:
            data = loaded["data"]
            _reject_unknown(data, {"path", "generator"}, '"data"')
            if "path" in data:
                merged["data_path"] = data["path"]
            if "generator" in data:
                gen = data["generator"]
                _reject_unknown(gen, {"n_rows", "class_proportions"}, '"data.generator"')
                merged["generator"] = gen
        if "ensemble" in loaded:
            ens = loaded["ensemble"]
            _reject_unknown(
                ens,
                {
                    "method",
                    "n_trees",
                    "max_depth",
                    "min_leaf",
                    "feature_subsample",
                    "split_strategy",
                    "histogram_bins",
                    "bootstrap",
                    "learning_rate",
                    "hard_vote",
                },
                '"ensemble"',
            )
            merged.update(ens)
        if "rfa" in loaded:
            rfa = loaded["rfa"]
            _reject_unknown(
                rfa,
                {"threshold", "max_sensors", "noise_snr_db", "importance_mode"},
                '"rfa"',
            )
            merged["rfa"] = rfa
        if "robustness" in loaded:
            rob = loaded["robustness"]
            _reject_unknown(rob, {"snr_db", "include_failure"}, '"robustness"')
            if "snr_db" in rob:
                merged["snr_levels"] = rob["snr_db"]
            if "include_failure" in rob:
                merged["include_failure"] = rob["include_failure"]

    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    try:
        if isinstance(merged.get("generator"), dict):
            merged["generator"] = GeneratorConfig(**merged["generator"])
        if isinstance(merged.get("rfa"), dict):
            merged["rfa"] = RfaConfig(**merged["rfa"])
        if isinstance(merged.get("snr_levels"), list):
            merged["snr_levels"] = tuple(float(v) for v in merged["snr_levels"])
        return PipelineConfig(**merged)
    except TypeError as exc:
        raise InvalidValueError(f"bad config value: {exc}") from exc


@dataclass(frozen=True)
class PipelineResult:
    """Everything a run produced, plus where the artifacts were written."""

    config: PipelineConfig
    ranking: tuple[tuple[str, float], ...]
    trace: RfaTrace
    final_model: EnsembleModel
    report: ClassReport
    robustness: RobustnessReport
    out_dir: Path
    artifact_paths: dict[str, Path]


def _chart_svg(trace: RfaTrace) -> str:
    """Line chart of clean and noise-probed macro-F1 versus sensor count."""
    width, height = 640, 400
    left, right, top, bottom = 58, 16, 18, 46
    plot_w, plot_h = width - left - right, height - top - bottom
    counts = [s.sensor_count for s in trace.steps]
    xmax = max(counts) if counts else 1

    def x_at(k: float) -> float:
        return left + plot_w * (k - 1) / max(xmax - 1, 1)

    def y_at(f: float) -> float:
        return top + plot_h * (1.0 - f)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for tick in range(0, 11, 2):
        f = tick / 10.0
        y = y_at(f)
        parts.append(
            f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w}" y2="{y:.2f}" '
            f'stroke="#e5e7eb" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" fill="#374151">{f:.1f}</text>'
        )
    x_step = max(1, (xmax - 1) // 12 + 1) if xmax > 1 else 1
    for k in range(1, xmax + 1, x_step):
        x = x_at(k)
        parts.append(
            f'<line x1="{x:.2f}" y1="{top + plot_h}" x2="{x:.2f}" y2="{top + plot_h + 4}" '
            f'stroke="#374151" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 18}" text-anchor="middle" '
            f'fill="#374151">{k}</text>'
        )
    parts.append(
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        f'stroke="#374151" stroke-width="1.5"/>'
    )
    parts.append(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" '
        f'stroke="#374151" stroke-width="1.5"/>'
    )
    y_thr = y_at(trace.threshold)
    parts.append(
        f'<line x1="{left}" y1="{y_thr:.2f}" x2="{left + plot_w}" y2="{y_thr:.2f}" '
        f'stroke="#16a34a" stroke-width="1" stroke-dasharray="2 4"/>'
    )
    parts.append(
        f'<text x="{left + plot_w}" y="{y_thr - 5:.2f}" text-anchor="end" '
        f'fill="#16a34a">threshold {trace.threshold:g}</text>'
    )
    series = (
        ("clean", "#2563eb", None, [(s.sensor_count, s.clean_f1) for s in trace.steps]),
        ("noisy top sensor", "#f59e0b", "6 3", [(s.sensor_count, s.noisy_f1) for s in trace.steps]),
    )
    for _, color, dash, points in series:
        if not points:
            continue
        coords = " ".join(f"{x_at(k):.2f},{y_at(v):.2f}" for k, v in points)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>'
        )
        for k, v in points:
            parts.append(
                f'<circle cx="{x_at(k):.2f}" cy="{y_at(v):.2f}" r="3" fill="{color}"/>'
            )
    legend_y = top + 14
    for name, color, _, _ in series:
        parts.append(
            f'<rect x="{left + 12}" y="{legend_y - 9}" width="18" height="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{left + 36}" y="{legend_y - 2}" fill="#111827">{name}</text>'
        )
        legend_y += 18
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 8}" text-anchor="middle" '
        f'fill="#111827">sensors used (ranked order)</text>'
    )
    parts.append(
        f'<text x="16" y="{top + plot_h / 2:.2f}" text-anchor="middle" fill="#111827" '
        f'transform="rotate(-90 16 {top + plot_h / 2:.2f})">macro-F1</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Execute every stage and write all artifacts under cfg.out_dir.

    On any failure an error.json naming the failed stage and error is
    still written (best effort) and the exception propagates.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = "setup"
    try:
        stage = "data"
        if cfg.data_path is not None:
            data = load_dataset(cfg.data_path)
        else:
            data = generate_dataset(cfg.generator, derive_seed(cfg.seed, "simgen"))

        stage = "rebalance"
        if cfg.undersample:
            data = undersample_majority(data, seed=derive_seed(cfg.seed, "undersample"))

        stage = "split"
        pair = split_train_test(
            data, cfg.train_fraction, stratified=True, seed=derive_seed(cfg.seed, "split")
        )
        train, test = pair.train, pair.test

        stage = "rank"
        ens_cfg = cfg.ensemble_config(train.n_sensors)
        model_seed = derive_seed(cfg.seed, "model")
        full_model = fit_ensemble(
            train.values,
            train.labels,
            ens_cfg,
            model_seed,
            train.symbols,
            n_classes=max(train.n_classes, test.n_classes),
            n_threads=cfg.n_threads,
        )
        ranking = rank_features(full_model, mode=cfg.rfa.importance_mode)

        stage = "selection"
        trace = run_rfa(train, test, ens_cfg, model_seed, cfg.rfa, ranking=ranking)

        stage = "final-fit"
        selected_idx = [train.sensor_index(s) for s in trace.selected]
        train_sel = train.select_sensors(selected_idx)
        test_sel = test.select_sensors(selected_idx)
        final_model = fit_ensemble(
            train_sel.values,
            train_sel.labels,
            ens_cfg,
            model_seed,
            train_sel.symbols,
            n_classes=max(train.n_classes, test.n_classes),
            n_threads=cfg.n_threads,
        )
        report = evaluate(final_model, test_sel)

        stage = "robustness"
        top_sensor = trace.ranking[0]
        specs = [
            NoiseSpec(sensor=top_sensor, mode=AWGN, snr_db=level)
            for level in cfg.snr_levels
        ]
        if cfg.include_failure:
            specs.append(NoiseSpec(sensor=top_sensor, mode=FAILURE))
        robustness = run_scenarios(
            final_model, test_sel, specs, derive_seed(cfg.seed, "robustness")
        )

        stage = "artifacts"
        paths = {
            "config": out_dir / "config.json",
            "model": out_dir / "model.json",
            "importance": out_dir / "importance.json",
            "rfa_trace_json": out_dir / "rfa_trace.json",
            "rfa_trace_csv": out_dir / "rfa_trace.csv",
            "robustness_json": out_dir / "robustness.json",
            "robustness_csv": out_dir / "robustness.csv",
            "class_report_json": out_dir / "class_report.json",
            "class_report_csv": out_dir / "class_report.csv",
            "chart": out_dir / "rfa_curves.svg",
        }
        write_json(paths["config"], cfg.to_json_dict())
        write_json(paths["model"], model_to_dict(final_model))
        write_json(
            paths["importance"],
            {
                "mode": cfg.rfa.importance_mode,
                "ranking": [{"sensor": s, "importance": v} for s, v in ranking],
            },
        )
        write_json(paths["rfa_trace_json"], trace.to_json_dict())
        write_csv_rows(paths["rfa_trace_csv"], trace.to_csv_rows())
        write_json(paths["robustness_json"], robustness.to_json_dict())
        write_csv_rows(paths["robustness_csv"], robustness.to_csv_rows())
        write_json(paths["class_report_json"], report.to_json_dict())
        write_csv_rows(paths["class_report_csv"], report.to_csv_rows())
        atomic_write_text(paths["chart"], _chart_svg(trace))
        stale_error = out_dir / "error.json"
        if stale_error.exists():
            stale_error.unlink()
    except Exception as exc:
        payload = {"stage": stage, "error": type(exc).__name__, "message": str(exc)}
        try:
            write_json(out_dir / "error.json", payload)
        except OSError:
            pass
        raise

    return PipelineResult(
        config=cfg,
        ranking=tuple(ranking),
        trace=trace,
        final_model=final_model,
        report=report,
        robustness=robustness,
        out_dir=out_dir,
        artifact_paths=paths,
    )
