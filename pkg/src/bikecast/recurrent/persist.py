"""Model artifact persistence: a versioned JSON document whose weight arrays
round-trip bit-exactly (raw float64 bytes, hex encoded)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..series import ScalerParams
from . import cells
from .model import SequenceRegressor, SerialModel

FORMAT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": arr.tobytes().hex()}


def _decode_array(doc: dict) -> np.ndarray:
    arr = np.frombuffer(bytes.fromhex(doc["data"]), dtype=np.float64)
    return arr.reshape(doc["shape"]).copy()


def _encode_regressor(reg: Optional[SequenceRegressor]) -> Optional[dict]:
    if reg is None:
        return None
    return {
        "kind": reg.cell.kind,
        "input_dim": reg.cell.input_dim,
        "hidden_dim": reg.cell.hidden_dim,
        "out_dim": reg.out_dim,
        "readout_mode": reg.readout_mode,
        "dropout_rate": reg.dropout_rate,
        "params": {name: _encode_array(p) for name, p in reg.params.items()},
    }


def _decode_regressor(doc: Optional[dict]) -> Optional[SequenceRegressor]:
    if doc is None:
        return None
    cell = cells.RecurrentCell(doc["kind"], doc["input_dim"], doc["hidden_dim"])
    reg = SequenceRegressor.__new__(SequenceRegressor)
    reg.cell = cell
    reg.out_dim = doc["out_dim"]
    reg.readout_mode = doc["readout_mode"]
    reg.dropout_rate = doc["dropout_rate"]
    reg.params = {name: _decode_array(p) for name, p in doc["params"].items()}
    cell.params = reg.params
    reg._cache = None
    return reg


def save_model(model: SerialModel, path: Path | str) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": model.config,
        "scaler": {
            "mins": _encode_array(model.scaler.mins),
            "maxs": _encode_array(model.scaler.maxs),
        },
        "channels": list(model.channels),
        "target_channel": model.target_channel,
        "prospective_channels": list(model.prospective_channels),
        "input_len": model.input_len,
        "horizon": model.horizon,
        "c1": _encode_regressor(model.c1),
        "c2": _encode_regressor(model.c2),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def load_model(path: Path | str) -> SerialModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc['format_version']}")
    return SerialModel(
        c1=_decode_regressor(doc["c1"]),
        c2=_decode_regressor(doc["c2"]),
        scaler=ScalerParams(
            _decode_array(doc["scaler"]["mins"]), _decode_array(doc["scaler"]["maxs"])
        ),
        channels=tuple(doc["channels"]),
        target_channel=doc["target_channel"],
        prospective_channels=tuple(doc["prospective_channels"]),
        input_len=doc["input_len"],
        horizon=doc["horizon"],
        config=doc["config"],
    )
