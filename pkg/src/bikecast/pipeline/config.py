"""Pipeline configuration: a sectioned key/value file, validated fail-closed.

Unknown sections or keys are errors and are reported with their full key
path. See docs in the README for the key reference."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import ConfigError

# section -> key -> (parser, default)
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _bool(text: str) -> bool:
    if text.lower() not in _BOOL:
        raise ValueError(f"expected a boolean, got {text!r}")
    return _BOOL[text.lower()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in _str_list(text)]


SCHEMA: dict[str, dict[str, tuple]] = {
    "data": {
        "source": (str, "scenario"),
        "csv_dir": (str, ""),
        "resolution_minutes": (int, 30),
    },
    "scenario": {
        "n_stations": (int, 6),
        "days": (int, 60),
        "daily_checkouts_per_station": (float, 180.0),
        "noise_level": (float, 0.1),
        "wind_weight": (float, 0.0),
        "precipitation_weight": (float, 0.0),
        "temperature_weight": (float, 0.0),
        "humidity_weight": (float, 0.0),
        "pressure_weight": (float, 0.0),
        "events_per_week": (float, 1.0),
        "event_weight": (float, 0.0),
        "weekend_multiplier": (float, 0.7),
        "holiday_multiplier": (float, 0.6),
        "spillover_radius": (float, 0.02),
        "capacity_min": (int, 24),
        "capacity_max": (int, 48),
        "n_weather_stations": (int, 2),
    },
    "target": {
        "level": (str, "system"),  # system | cluster | station
        "station_id": (str, ""),
        "stations": (_str_list, []),
        "variable": (str, "checkouts"),  # checkouts | checkins
        "horizon": (int, 48),
        "timezone": (str, "UTC"),
    },
    "masks": {
        "channels": (_str_list, []),
        "weather_variables": (_str_list, ["wind_kmh", "precipitation_mm"]),
        "weather_k": (int, 1),
        "nearby_radius": (float, 0.03),
        "event_max_dist": (float, 0.02),
        "event_ramp_steps": (int, 1),
        "day_mapping": (str, "identity"),  # identity | weekday-sat-sun
    },
    "segmentation": {
        "folds": (int, 3),
        "step_days": (int, 7),
        "window_days": (int, 0),  # 0 -> derived from folds and step
        "input_len": (int, 0),  # 0 -> 7 * horizon
        "slide": (int, 0),  # 0 -> one day
        "fractions": (_float_list, [0.6, 0.2, 0.2]),
    },
    "training": {
        "loss": (str, "mse"),
        "optimizer": (str, "adam"),
        "learning_rate": (float, 3e-3),
        "batch_size": (int, 8),
        "max_epochs": (int, 60),
        "patience": (int, 8),
        "dropout_rate": (float, 0.0),
        "l1_weight": (float, 0.0),
        "hidden_c1": (int, 32),
        "hidden_c2": (int, 16),
        "cell_c2": (str, "lstm"),
        "clip_norm": (float, 5.0),
        "search_budget": (int, 0),
    },
    "models": {
        "list": (_str_list, []),
    },
    "output": {
        "directory": (str, "out"),
        "figures": (_bool, True),
    },
}

MODEL_SCHEMA: dict[str, tuple] = {
    "type": (str, ""),  # holt-winters | knn | barycenter | lstm | lstm+c2
    "masks": (_str_list, None),  # None -> global [masks] channels
    "prospective": (_str_list, []),
    "k": (int, 5),
    "distance": (str, "euclidean"),
    "combiner": (str, "euclidean-mean"),
    "period": (int, 0),  # 0 -> steps per day
    "mode": (str, "additive"),  # holt-winters seasonal form
    "hw_budget": (int, 20),
}

MODEL_TYPES = ("holt-winters", "knn", "barycenter", "lstm", "lstm+c2")
MASK_CHANNELS = ("day", "hour", "holiday", "academic", "weather", "events", "nearby", "counterpart")


@dataclass
class ModelSpec:
    name: str
    options: dict = field(default_factory=dict)

    @property
    def type(self) -> str:
        return self.options["type"]


@dataclass
class PipelineConfig:
    sections: dict = field(default_factory=dict)
    models: list[ModelSpec] = field(default_factory=list)
    seed: int = 0
    path: Optional[Path] = None

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]


def _parse_section(name: str, raw: dict, schema: dict[str, tuple]) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key '{name}.{key}'")
        parser, _ = schema[key]
        try:
            out[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for '{name}.{key}': {exc}") from exc
    for key, (_, default) in schema.items():
        out.setdefault(key, default)
    return out


def load_config(path: Path | str, seed_override: Optional[int] = None) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    cfg = PipelineConfig(path=path)
    seen_models = []
    for section in parser.sections():
        if section == "run":
            raw = dict(parser.items(section))
            for key, value in raw.items():
                if key != "seed":
                    raise ConfigError(f"unknown key 'run.{key}'")
                cfg.seed = int(value)
            continue
        if section.startswith("model."):
            name = section[len("model.") :]
            opts = _parse_section(section, dict(parser.items(section)), MODEL_SCHEMA)
            if opts["type"] not in MODEL_TYPES:
                raise ConfigError(
                    f"unknown model type {opts['type']!r} in '{section}.type'"
                )
            seen_models.append(ModelSpec(name, opts))
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section '{section}'")
        cfg.sections[section] = _parse_section(section, dict(parser.items(section)), SCHEMA[section])

    for section, schema in SCHEMA.items():
        cfg.sections.setdefault(
            section, {key: default for key, (_, default) in schema.items()}
        )
    cfg.models = seen_models
    if seed_override is not None:
        cfg.seed = seed_override

    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    data = cfg["data"]
    if data["source"] not in ("scenario", "csv"):
        raise ConfigError(f"bad value for 'data.source': {data['source']!r}")
    if data["source"] == "csv" and not data["csv_dir"]:
        raise ConfigError("'data.csv_dir' is required when data.source = csv")
    target = cfg["target"]
    if target["level"] not in ("system", "cluster", "station"):
        raise ConfigError(f"bad value for 'target.level': {target['level']!r}")
    if target["level"] == "station" and not target["station_id"]:
        raise ConfigError("'target.station_id' is required at station level")
    if target["level"] == "cluster" and not target["stations"]:
        raise ConfigError("'target.stations' is required at cluster level")
    if target["variable"] not in ("checkouts", "checkins"):
        raise ConfigError(f"bad value for 'target.variable': {target['variable']!r}")
    if target["horizon"] < 1:
        raise ConfigError("'target.horizon' must be >= 1")
    for ch in cfg["masks"]["channels"]:
        if ch not in MASK_CHANNELS:
            raise ConfigError(f"unknown mask channel {ch!r} in 'masks.channels'")
    fracs = cfg["segmentation"]["fractions"]
    if len(fracs) != 3:
        raise ConfigError("'segmentation.fractions' needs exactly three values")
    names = {m.name for m in cfg.models}
    for listed in cfg["models"]["list"]:
        if listed not in names:
            raise ConfigError(f"'models.list' references undefined model {listed!r}")
    if cfg["models"]["list"]:
        order = cfg["models"]["list"]
        cfg.models = sorted(cfg.models, key=lambda m: order.index(m.name) if m.name in order else 99)
        cfg.models = [m for m in cfg.models if m.name in order]
    for spec in cfg.models:
        if spec.options["masks"] is not None:
            for ch in spec.options["masks"]:
                if ch not in MASK_CHANNELS:
                    raise ConfigError(
                        f"unknown mask channel {ch!r} in 'model.{spec.name}.masks'"
                    )
