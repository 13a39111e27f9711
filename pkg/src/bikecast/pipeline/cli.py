"""Command-line front end for the forecasting pipeline.

Commands: generate, ingest, stats, mask, segment, train, forecast,
evaluate, compare. Exit codes: 0 success, 1 configuration error,
2 runtime failure. Set BIKECAST_LOG to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from zoneinfo import ZoneInfo

from .. import ingest, synthetic
from ..errors import BikecastError, ConfigError
from ..evaluation import compare_models
from . import stages
from .config import PipelineConfig, load_config
from .plots import plot_forecast_example, plot_model_comparison, plot_weekday_profiles

log = logging.getLogger("bikecast")

COMMANDS = (
    "generate",
    "ingest",
    "stats",
    "mask",
    "segment",
    "train",
    "forecast",
    "evaluate",
    "compare",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bikecast",
        description="Context-aware demand forecasting for station-based bike sharing.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="pipeline config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker count (stages currently run serially)"
    )
    return parser


def _out_dir(cfg: PipelineConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(cfg: PipelineConfig, out: Path) -> list[Path]:
    scfg = stages.scenario_from_config(cfg)
    network = synthetic.generate_network(
        scfg.n_stations, scfg.bounding_box, scfg.capacity_range, seed=cfg.seed
    )
    result = synthetic.generate_scenario(network, scfg)
    data_dir = out / "data"
    data_dir.mkdir(exist_ok=True)
    written = synthetic.write_scenario(result, data_dir)
    return sorted(written.values())


def cmd_ingest(cfg: PipelineConfig, out: Path) -> list[Path]:
    bundle = stages.load_data(cfg)
    target = stages.target_series(cfg, bundle)
    path = out / "target.csv"
    ingest.write_series(path, target)
    log.info(
        "target series: %d steps of %s at %s resolution",
        target.length,
        cfg["target"]["variable"],
        target.resolution,
    )
    return [path]


def cmd_stats(cfg: PipelineConfig, out: Path) -> list[Path]:
    bundle = stages.load_data(cfg)
    target = stages.target_series(cfg, bundle)
    rows = stages.stats_summary(target, ZoneInfo(cfg["target"]["timezone"]))
    path = out / "stats.csv"
    stages.write_stats_csv(path, rows)
    artifacts = [path]
    if cfg["output"]["figures"]:
        fig = out / "weekday_profiles.png"
        plot_weekday_profiles(rows, fig)
        artifacts.append(fig)
    return artifacts


def cmd_mask(cfg: PipelineConfig, out: Path) -> list[Path]:
    bundle = stages.load_data(cfg)
    series = stages.build_masked_series(cfg, bundle, cfg["masks"]["channels"])
    path = out / "masked.csv"
    ingest.write_series(path, series)
    return [path]


def cmd_segment(cfg: PipelineConfig, out: Path) -> list[Path]:
    bundle = stages.load_data(cfg)
    series = stages.build_masked_series(cfg, bundle, cfg["masks"]["channels"])
    folds = stages.make_folds(cfg, series)
    path = out / "segments.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "split", "origin", "input_len", "horizon"])
        for i, fd in enumerate(folds):
            for split in ("train", "validation", "test"):
                for inst in getattr(fd, split):
                    w.writerow(
                        [
                            i,
                            split,
                            ingest.format_timestamp(inst.origin),
                            inst.input.length,
                            inst.output.length,
                        ]
                    )
    return [path]


def cmd_train(cfg: PipelineConfig, out: Path) -> list[Path]:
    bundle = stages.load_data(cfg)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    artifacts = stages.train_recurrent_models(
        cfg, bundle, models_dir, figures=cfg["output"]["figures"]
    )
    if not artifacts:
        log.warning("no recurrent models configured; nothing to train")
    return artifacts


def cmd_forecast(cfg: PipelineConfig, out: Path) -> list[Path]:
    bundle = stages.load_data(cfg)
    truth, forecasts = stages.forecast_examples(cfg, bundle, out / "models")
    path = out / "forecast.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "observed", *forecasts])
        for t in range(len(truth)):
            w.writerow(
                [t, f"{truth[t]:.6f}", *(f"{pred[t]:.6f}" for pred in forecasts.values())]
            )
    artifacts = [path]
    if cfg["output"]["figures"]:
        fig = out / "forecast.png"
        plot_forecast_example(truth, forecasts, fig)
        artifacts.append(fig)
    return artifacts


def _evaluate_all(cfg: PipelineConfig, out: Path) -> list:
    if not cfg.models:
        raise ConfigError("no models configured; add [model.NAME] sections")
    bundle = stages.load_data(cfg)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    evaluations = []
    for spec in cfg.models:
        log.info("evaluating model %s (%s)", spec.name, spec.type)
        evaluations.append(stages.evaluate_model(cfg, bundle, spec, save_dir=models_dir))
    return evaluations


def cmd_evaluate(cfg: PipelineConfig, out: Path) -> list[Path]:
    evaluations = _evaluate_all(cfg, out)
    path = out / "report.csv"
    stages.write_report_csv(path, evaluations)
    artifacts = [path]
    if cfg["output"]["figures"]:
        fig = out / "model_comparison.png"
        rows = [{"model": ev.name, **ev.summary()} for ev in evaluations]
        plot_model_comparison(rows, fig)
        artifacts.append(fig)
    return artifacts


def cmd_compare(cfg: PipelineConfig, out: Path) -> list[Path]:
    evaluations = _evaluate_all(cfg, out)
    report_path = out / "report.csv"
    stages.write_report_csv(report_path, evaluations)
    artifacts = [report_path]
    if len(evaluations) > 1:
        report = compare_models(evaluations)
        sig_path = out / "significance.csv"
        stages.write_significance_csv(sig_path, report.tests)
        artifacts.append(sig_path)
    if cfg["output"]["figures"]:
        fig = out / "model_comparison.png"
        rows = [{"model": ev.name, **ev.summary()} for ev in evaluations]
        plot_model_comparison(rows, fig)
        artifacts.append(fig)
    return artifacts


HANDLERS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "mask": cmd_mask,
    "segment": cmd_segment,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("BIKECAST_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        out = _out_dir(cfg, args.out)
        artifacts = HANDLERS[args.command](cfg, out)
        manifest = stages.write_manifest(out, cfg, args.command, list(artifacts))
        log.info("wrote %d artifacts, manifest at %s", len(artifacts), manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (BikecastError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
