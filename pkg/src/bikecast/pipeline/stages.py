"""Pipeline stages: data assembly, masking, segmentation, model training,
evaluation and report generation."""

from __future__ import annotations

import csv
import hashlib
import json
import zlib
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .. import baselines, ingest, synthetic
from ..errors import ConfigError, ResolutionTooCoarse
from ..evaluation import ModelEvaluation, evaluate_folds
from ..masks import (
    DAY_IDENTITY,
    DAY_WEEKDAY_SAT_SUN,
    HOUR_QUARTERS,
    MaskChannel,
    NearbyMaskSpec,
    attach_masks,
    centroid,
    create_nearby_mask,
    day_mask,
    event_mask,
    holiday_mask,
    hour_mask,
    period_mask,
    weather_channels,
)
from ..recurrent import (
    TrainConfig,
    build_serial_model,
    forecast as serial_forecast,
    save_model,
    train as train_serial,
)
from ..segmentation import (
    Fold,
    Instance,
    create_subdatasets,
    segment_instances,
    steps_per_day,
    temporal_split,
    training_index_range,
)
from ..series import (
    ScalerParams,
    Station,
    TimeSeries,
    aggregate_stations,
    fit_minmax,
    infer_flows,
    scale_array,
)
from .config import ModelSpec, PipelineConfig


@dataclass
class DataBundle:
    stations: list[Station]
    loads: dict[str, TimeSeries]
    checkins: dict[str, TimeSeries]
    checkouts: dict[str, TimeSeries]
    weather: dict[str, tuple[tuple[float, float], TimeSeries]]
    events: list
    calendar: ingest.CalendarData


@dataclass
class FoldData:
    """A temporal fold together with its source window and fold-local scaler."""

    fold: Fold
    series: TimeSeries
    scaler: ScalerParams

    @property
    def train(self):
        return self.fold.train

    @property
    def validation(self):
        return self.fold.validation

    @property
    def test(self):
        return self.fold.test


def scenario_from_config(cfg: PipelineConfig) -> synthetic.ScenarioConfig:
    s = cfg["scenario"]
    weights = {
        "wind_kmh": s["wind_weight"],
        "precipitation_mm": s["precipitation_weight"],
        "temperature_c": s["temperature_weight"],
        "humidity_pct": s["humidity_weight"],
        "pressure_hpa": s["pressure_weight"],
    }
    wk = s["weekend_multiplier"]
    return synthetic.ScenarioConfig(
        n_stations=s["n_stations"],
        days=s["days"],
        resolution_minutes=cfg["data"]["resolution_minutes"],
        daily_checkouts_per_station=s["daily_checkouts_per_station"],
        weekday_multipliers=(1.0, 1.0, 1.0, 1.0, 1.0, wk, wk),
        holiday_multiplier=s["holiday_multiplier"],
        weather_weights={k: v for k, v in weights.items() if v != 0.0},
        events_per_week=s["events_per_week"],
        event_weight=s["event_weight"],
        spillover_radius=s["spillover_radius"],
        noise_level=s["noise_level"],
        seed=cfg.seed,
        capacity_range=(s["capacity_min"], s["capacity_max"]),
        n_weather_stations=s["n_weather_stations"],
    )


def load_data(cfg: PipelineConfig) -> DataBundle:
    """Assemble the raw data bundle from a scenario or the CSV schemas."""
    if cfg["data"]["source"] == "scenario":
        scfg = scenario_from_config(cfg)
        network = synthetic.generate_network(
            scfg.n_stations, scfg.bounding_box, scfg.capacity_range, seed=cfg.seed
        )
        result = synthetic.generate_scenario(network, scfg)
        return DataBundle(
            stations=result.stations,
            loads=result.loads,
            checkins=result.checkins,
            checkouts=result.checkouts,
            weather=result.weather,
            events=result.events,
            calendar=result.calendar,
        )
    base = Path(cfg["data"]["csv_dir"])
    resolution = timedelta(minutes=cfg["data"]["resolution_minutes"])
    stations = ingest.read_stations(base / "stations.csv")
    stations, loads = ingest.read_station_status(
        base / "station_status.csv", stations, resolution
    )
    checkins, checkouts = {}, {}
    by_id = {s.id: s for s in stations}
    for sid, load in loads.items():
        ci, co = infer_flows(load, by_id[sid])
        checkins[sid] = ci
        checkouts[sid] = co
    weather = ingest.read_weather(base / "weather.csv")
    events_path = base / "events.csv"
    events = ingest.read_events(events_path) if events_path.exists() else []
    calendar_path = base / "calendar.csv"
    calendar = (
        ingest.read_calendar(calendar_path) if calendar_path.exists() else ingest.CalendarData()
    )
    return DataBundle(stations, loads, checkins, checkouts, weather, events, calendar)


def selected_station_ids(cfg: PipelineConfig, bundle: DataBundle) -> list[str]:
    target = cfg["target"]
    if target["level"] == "system":
        return sorted(s.id for s in bundle.stations)
    if target["level"] == "station":
        return [target["station_id"]]
    return list(target["stations"])


def target_series(cfg: PipelineConfig, bundle: DataBundle) -> TimeSeries:
    """Aggregate the target flow variable over the configured spatial level."""
    ids = selected_station_ids(cfg, bundle)
    per_station = bundle.checkouts if cfg["target"]["variable"] == "checkouts" else bundle.checkins
    return aggregate_stations(per_station, ids)


def build_masked_series(
    cfg: PipelineConfig, bundle: DataBundle, mask_list: Sequence[str]
) -> TimeSeries:
    """Target series with the selected context channels appended."""
    base = target_series(cfg, bundle)
    tz = ZoneInfo(cfg["target"]["timezone"])
    stamps = base.timestamps()
    ids = selected_station_ids(cfg, bundle)
    by_id = {s.id: s for s in bundle.stations}
    location = centroid([by_id[i] for i in ids])
    m = cfg["masks"]

    channels = []
    for kind in mask_list:
        if kind == "day":
            mapping = DAY_IDENTITY if m["day_mapping"] == "identity" else DAY_WEEKDAY_SAT_SUN
            channels.append(day_mask(stamps, mapping, tz))
        elif kind == "hour":
            channels.append(hour_mask(stamps, HOUR_QUARTERS, tz))
        elif kind == "holiday":
            channels.append(holiday_mask(stamps, bundle.calendar.holidays, tz))
        elif kind == "academic":
            intervals = ingest.CalendarData.intervals(bundle.calendar.academic_breaks)
            channels.append(period_mask(stamps, intervals, tz, name="academic"))
        elif kind == "weather":
            channels.extend(
                weather_channels(
                    bundle.weather,
                    location,
                    m["weather_k"],
                    m["weather_variables"],
                    base.start,
                    base.resolution,
                    base.length,
                )
            )
        elif kind == "events":
            channels.append(
                event_mask(stamps, bundle.events, location, m["event_max_dist"], m["event_ramp_steps"])
            )
        elif kind == "counterpart":
            other = "checkins" if cfg["target"]["variable"] == "checkouts" else "checkouts"
            per_station = bundle.checkins if other == "checkins" else bundle.checkouts
            counterpart = aggregate_stations(per_station, ids)
            channels.append(MaskChannel(other, counterpart.values[:, 0], "continuous"))
        elif kind != "nearby":
            raise ConfigError(f"unknown mask channel {kind!r}")

    out = attach_masks(base, channels) if channels else base
    if "nearby" in mask_list:
        out = create_nearby_mask(
            NearbyMaskSpec(
                target_ids=tuple(ids),
                stations=tuple(bundle.stations),
                radius=m["nearby_radius"],
                series=out,
                loads=bundle.loads,
            )
        )
    return out


def make_folds(
    cfg: PipelineConfig, series: TimeSeries, prospective_channels: Sequence[str] = ()
) -> list[FoldData]:
    """Sub-datasets -> instances -> temporal folds with fold-local scalers."""
    seg = cfg["segmentation"]
    spd = steps_per_day(series)
    total_days = series.length // spd
    folds = seg["folds"]
    step = seg["step_days"]
    window = seg["window_days"] or total_days - (folds - 1) * step
    if window < 1:
        raise ConfigError(
            f"{total_days} days cannot hold {folds} folds at a {step}-day step"
        )
    h = cfg["target"]["horizon"]
    input_len = seg["input_len"] or 7 * h
    slide = seg["slide"] or spd
    fractions = tuple(seg["fractions"])

    out = []
    for window_series in create_subdatasets(series, window, step)[:folds]:
        instances = segment_instances(
            window_series,
            h,
            series.channels[0],
            input_len=input_len,
            slide=slide,
            prospective_channels=prospective_channels,
        )
        fold = temporal_split(instances, fractions)
        scaler = fit_minmax(window_series, training_index_range(fold, window_series))
        out.append(FoldData(fold, window_series, scaler))
    return out


def stats_summary(series: TimeSeries, tz: ZoneInfo) -> list[dict]:
    """Per (weekday, step-of-day) mean and std of the first channel."""
    if series.resolution >= timedelta(days=1):
        raise ResolutionTooCoarse(f"resolution {series.resolution} is not sub-daily")
    spd = steps_per_day(series)
    buckets: dict[tuple[int, int], list[float]] = {}
    for when, row in zip(series.timestamps(), series.values):
        local = when.astimezone(tz)
        step = int(
            (local.hour * 3600 + local.minute * 60 + local.second)
            / (24 * 3600 / spd)
        )
        buckets.setdefault((local.weekday(), step), []).append(float(row[0]))
    rows = []
    for (wd, step), vals in sorted(buckets.items()):
        arr = np.asarray(vals)
        rows.append(
            {
                "weekday": wd,
                "step_of_day": step,
                "mean": float(arr.mean()),
                "std": float(arr.std()),
            }
        )
    return rows


# -- forecaster factories -------------------------------------------------

def _model_seed(base_seed: int, name: str, fold_idx: int) -> int:
    return (base_seed * 1009 + zlib.crc32(name.encode()) + fold_idx) % (2 ** 31)


def holt_winters_factory(cfg: PipelineConfig, spec: ModelSpec, fold_idx: int):
    h = cfg["target"]["horizon"]

    def factory(fd: FoldData):
        spd = steps_per_day(fd.series)
        period = spec.options["period"] or spd
        mode = spec.options["mode"]
        target_channel = fd.series.channels[0]
        rng = np.random.default_rng(_model_seed(cfg.seed, spec.name, fold_idx))
        # seeded random search on validation instances
        best, best_mae = (0.3, 0.1, 0.1), np.inf
        val_sample = fd.validation[:: max(1, len(fd.validation) // 5)]
        for _ in range(spec.options["hw_budget"]):
            a, b, g = rng.uniform(0, 1, 3)
            maes = []
            for inst in val_sample:
                x = inst.input.channel(target_channel)
                try:
                    state = baselines.holt_winters_fit(x, period, a, b, g, mode=mode)
                    pred = baselines.holt_winters_forecast(state, h)
                except Exception:
                    maes = None
                    break
                maes.append(float(np.abs(pred - inst.output.values[:, 0]).mean()))
            if maes is None:
                continue
            score = float(np.mean(maes))
            if np.isfinite(score) and score < best_mae:
                best, best_mae = (a, b, g), score
        a, b, g = best

        def predict(inst: Instance) -> np.ndarray:
            x = inst.input.channel(target_channel)
            state = baselines.holt_winters_fit(x, period, a, b, g, mode=mode)
            return baselines.holt_winters_forecast(state, h)

        return predict

    return factory


def knn_factory(cfg: PipelineConfig, spec: ModelSpec, barycenter: bool = False):
    def factory(fd: FoldData):
        k = len(fd.train) if barycenter else min(spec.options["k"], len(fd.train))
        distance = spec.options["distance"]
        combiner = spec.options["combiner"]

        scaled_train = [
            Instance(
                input=TimeSeries(
                    inst.input.start,
                    inst.input.resolution,
                    inst.input.channels,
                    scale_array(inst.input.values, fd.scaler),
                ),
                output=inst.output,
                origin=inst.origin,
            )
            for inst in fd.train
        ]

        def predict(inst: Instance) -> np.ndarray:
            query = scale_array(inst.input.values, fd.scaler)
            return baselines.knn_forecast(scaled_train, query, k, distance, combiner)

        return predict

    return factory


def build_train_config(cfg: PipelineConfig, seed: int) -> TrainConfig:
    t = cfg["training"]
    return TrainConfig(
        loss=t["loss"],
        optimizer=t["optimizer"],
        learning_rate=t["learning_rate"],
        batch_size=t["batch_size"],
        max_epochs=t["max_epochs"],
        patience=t["patience"],
        dropout_rate=t["dropout_rate"],
        l1_weight=t["l1_weight"],
        seed=seed,
        hidden_c1=t["hidden_c1"],
        hidden_c2=t["hidden_c2"],
        cell_c2=t["cell_c2"],
        clip_norm=t["clip_norm"],
    )


def lstm_factory(
    cfg: PipelineConfig,
    spec: ModelSpec,
    fold_idx_holder: list[int],
    save_dir: Optional[Path] = None,
):
    h = cfg["target"]["horizon"]
    with_c2 = spec.type == "lstm+c2"
    prospective = tuple(spec.options["prospective"]) if with_c2 else ()

    def factory(fd: FoldData):
        fold_idx = fold_idx_holder[0]
        fold_idx_holder[0] += 1
        seed = _model_seed(cfg.seed, spec.name, fold_idx)
        tc = build_train_config(cfg, seed)
        input_len = fd.train[0].input.length
        model = build_serial_model(
            fd.series.channels,
            fd.series.channels[0],
            prospective,
            input_len,
            h,
            fd.scaler,
            tc,
            with_c2=with_c2,
        )
        train_serial(model, fd.fold, tc)
        if save_dir is not None:
            save_model(model, save_dir / f"{spec.name}_fold{fold_idx}.json")

        def predict(inst: Instance) -> np.ndarray:
            window = model.scale_inputs(inst.input.values)
            prosp = None
            if with_c2:
                prosp = model.scale_prospective(inst.prospective.values)
            pred = serial_forecast(model, window, prosp)
            return model.scale_target(pred, "inverse")

        return predict

    return factory


def evaluate_model(
    cfg: PipelineConfig,
    bundle: DataBundle,
    spec: ModelSpec,
    save_dir: Optional[Path] = None,
) -> ModelEvaluation:
    """Train and score one configured model across all folds."""
    fold_datas = model_folds(cfg, bundle, spec)

    if spec.type == "holt-winters":
        counter = [0]

        def factory(fd):
            idx = counter[0]
            counter[0] += 1
            return holt_winters_factory(cfg, spec, idx)(fd)

    elif spec.type in ("knn", "barycenter"):
        factory = knn_factory(cfg, spec, barycenter=spec.type == "barycenter")
    elif spec.type in ("lstm", "lstm+c2"):
        factory = lstm_factory(cfg, spec, [0], save_dir)
    else:
        raise ConfigError(f"unknown model type {spec.type!r}")

    return evaluate_folds(spec.name, factory, fold_datas)


def _model_mask_list(cfg: PipelineConfig, spec: ModelSpec) -> list[str]:
    if spec.type == "holt-winters":
        return []
    masks = spec.options["masks"]
    return list(cfg["masks"]["channels"]) if masks is None else list(masks)


def model_folds(cfg: PipelineConfig, bundle: DataBundle, spec: ModelSpec) -> list[FoldData]:
    series = build_masked_series(cfg, bundle, _model_mask_list(cfg, spec))
    prospective = tuple(spec.options["prospective"]) if spec.type == "lstm+c2" else ()
    for ch in prospective:
        if ch not in series.channels:
            raise ConfigError(
                f"prospective channel {ch!r} of model {spec.name!r} is not produced "
                f"by its masks"
            )
    return make_folds(cfg, series, prospective)


def train_recurrent_models(
    cfg: PipelineConfig, bundle: DataBundle, out_dir: Path, figures: bool = True
) -> list[Path]:
    """Train every configured recurrent model per fold; persist weights."""
    from .plots import plot_training_history

    artifacts: list[Path] = []
    for spec in cfg.models:
        if spec.type not in ("lstm", "lstm+c2"):
            continue
        prospective = tuple(spec.options["prospective"]) if spec.type == "lstm+c2" else ()
        h = cfg["target"]["horizon"]
        for i, fd in enumerate(model_folds(cfg, bundle, spec)):
            tc = build_train_config(cfg, _model_seed(cfg.seed, spec.name, i))
            model = build_serial_model(
                fd.series.channels,
                fd.series.channels[0],
                prospective,
                fd.train[0].input.length,
                h,
                fd.scaler,
                tc,
                with_c2=spec.type == "lstm+c2",
            )
            history = train_serial(model, fd.fold, tc)
            path = out_dir / f"{spec.name}_fold{i}.json"
            save_model(model, path)
            artifacts.append(path)
            if figures:
                fig = out_dir / f"{spec.name}_fold{i}_history.png"
                plot_training_history(history, fig)
                artifacts.append(fig)
    return artifacts


def forecast_examples(
    cfg: PipelineConfig,
    bundle: DataBundle,
    models_dir: Optional[Path] = None,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Forecast the first test instance of the first fold with each model.

    Recurrent models are loaded from ``models_dir`` when a saved file exists
    there; otherwise they are trained in place (deterministic per seed).
    """
    from ..recurrent import load_model

    truth = None
    forecasts: dict[str, np.ndarray] = {}
    for spec in cfg.models:
        fd = model_folds(cfg, bundle, spec)[0]
        inst = fd.test[0]
        if truth is None:
            truth = inst.output.values[:, 0]
        saved = None if models_dir is None else models_dir / f"{spec.name}_fold0.json"
        if spec.type in ("lstm", "lstm+c2") and saved is not None and saved.exists():
            model = load_model(saved)

            def predict(inst, model=model):
                window = model.scale_inputs(inst.input.values)
                prosp = (
                    model.scale_prospective(inst.prospective.values)
                    if model.c2 is not None
                    else None
                )
                return model.scale_target(serial_forecast(model, window, prosp), "inverse")

        elif spec.type == "holt-winters":
            predict = holt_winters_factory(cfg, spec, 0)(fd)
        elif spec.type in ("knn", "barycenter"):
            predict = knn_factory(cfg, spec, barycenter=spec.type == "barycenter")(fd)
        else:
            predict = lstm_factory(cfg, spec, [0])(fd)
        forecasts[spec.name] = np.asarray(predict(inst), dtype=np.float64).reshape(-1)
    if truth is None:
        raise ConfigError("no models configured; add [model.NAME] sections")
    return truth, forecasts


# -- artifact writing ------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.6f}"


def write_report_csv(path: Path, evaluations: Sequence[ModelEvaluation]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "mae_mean", "mae_std", "rmse_mean", "rmse_std"])
        for ev in evaluations:
            s = ev.summary()
            w.writerow(
                [ev.name, _fmt(s["mae_mean"]), _fmt(s["mae_std"]), _fmt(s["rmse_mean"]), _fmt(s["rmse_std"])]
            )


def write_significance_csv(path: Path, tests) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model_a", "model_b", "direction", "t", "p"])
        for a, b, direction, t, p in tests:
            w.writerow([a, b, direction, f"{t:.6f}", f"{p:.8f}"])


def write_stats_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["weekday", "step_of_day", "mean", "std"])
        for r in rows:
            w.writerow([r["weekday"], r["step_of_day"], _fmt(r["mean"]), _fmt(r["std"])])


def write_manifest(out_dir: Path, cfg: PipelineConfig, command: str, artifacts: list[Path]) -> Path:
    digest = ""
    if cfg.path is not None and cfg.path.exists():
        digest = hashlib.sha256(cfg.path.read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "config_hash": digest,
        "seed": cfg.seed,
        "artifacts": sorted(str(p.relative_to(out_dir)) for p in artifacts),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return path
