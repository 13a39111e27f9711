"""Sequence regressors and the serial two-stage forecaster.

The first stage (C1) maps a context-enriched input window to the full
horizon in one shot; the optional second stage (C2) walks the horizon,
consuming the first-stage forecast together with prospective context
channels, and emits the refined forecast."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ChannelMismatch, LengthMismatch, ShapeMismatch
from ..series import ScalerParams
from . import cells


class SequenceRegressor:
    """A recurrent cell with a dense readout.

    readout_mode 'final' maps the last hidden state to ``out_dim`` values
    (direct multi-step forecasting); 'step' maps every hidden state to one
    value (used for horizon-walking refinement). Inverted dropout is applied
    to the readout input during training only.
    """

    def __init__(
        self,
        cell: cells.RecurrentCell,
        out_dim: int,
        readout_mode: str = "final",
        dropout_rate: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ):
        if readout_mode not in ("final", "step"):
            raise ValueError(f"unknown readout mode {readout_mode!r}")
        if readout_mode == "step" and out_dim != 1:
            raise ValueError("step readout emits one value per step")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        rng = rng if rng is not None else np.random.default_rng(0)
        H = cell.hidden_dim
        scale = 1.0 / np.sqrt(H)
        self.cell = cell
        self.out_dim = out_dim
        self.readout_mode = readout_mode
        self.dropout_rate = dropout_rate
        self.params: dict[str, np.ndarray] = dict(cell.params)
        self.params["W_out"] = rng.uniform(-scale, scale, (H, out_dim))
        self.params["b_out"] = np.zeros(out_dim)
        cell.params = self.params  # single shared storage
        self._cache = None

    def forward(
        self,
        x: np.ndarray,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> np.ndarray:
        """Predict from a (B, L, m) batch; (L, m) inputs are auto-batched."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x = x[None]
        hs, cell_cache = cells.forward(self.cell, x)
        if self.readout_mode == "final":
            feat = hs[:, -1, :]
        else:
            feat = hs
        if train and self.dropout_rate > 0.0:
            if rng is None:
                raise ValueError("training forward pass needs an rng for dropout")
            keep = 1.0 - self.dropout_rate
            mask = (rng.random(feat.shape) < keep) / keep
            feat = feat * mask
        else:
            mask = None
        y = feat @ self.params["W_out"] + self.params["b_out"]
        if self.readout_mode == "step":
            y = y[:, :, 0]
        self._cache = (x.shape, cell_cache, feat, mask)
        return y[0] if single else y

    def backward(self, dy: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients for the most recent training forward pass."""
        if self._cache is None:
            raise ShapeMismatch("backward called before forward")
        x_shape, cell_cache, feat, mask = self._cache
        B, L, _ = x_shape
        H = self.cell.hidden_dim
        dy = np.asarray(dy, dtype=np.float64)
        if self.readout_mode == "final":
            dfeat = dy @ self.params["W_out"].T  # (B, H)
            dW_out = feat.T @ dy
            db_out = dy.sum(axis=0)
            if mask is not None:
                dfeat = dfeat * mask
            dh_seq = np.zeros((B, L, H))
            dh_seq[:, -1, :] = dfeat
        else:
            dy3 = dy[:, :, None]  # (B, L, 1)
            dfeat = dy3 @ self.params["W_out"].T  # (B, L, H)
            dW_out = np.einsum("blh,blo->ho", feat, dy3)
            db_out = dy3.sum(axis=(0, 1))
            if mask is not None:
                dfeat = dfeat * mask
            dh_seq = dfeat
        cell_grads, _ = cells.backward(self.cell, cell_cache, dh_seq)
        cell_grads["W_out"] = dW_out
        cell_grads["b_out"] = db_out
        return cell_grads


@dataclass
class SerialModel:
    """Serial composition of a horizon forecaster and a refinement stage."""

    c1: SequenceRegressor
    c2: Optional[SequenceRegressor]
    scaler: ScalerParams
    channels: tuple[str, ...]
    target_channel: str
    prospective_channels: tuple[str, ...]
    input_len: int
    horizon: int
    config: dict = field(default_factory=dict)

    @property
    def target_index(self) -> int:
        return self.channels.index(self.target_channel)

    def prospective_indices(self) -> list[int]:
        return [self.channels.index(c) for c in self.prospective_channels]

    def scale_inputs(self, values: np.ndarray, direction: str = "forward") -> np.ndarray:
        from ..series import scale_array

        return scale_array(values, self.scaler, direction)

    def scale_target(self, values: np.ndarray, direction: str = "forward") -> np.ndarray:
        idx = self.target_index
        lo = self.scaler.mins[idx]
        hi = self.scaler.maxs[idx]
        span = hi - lo
        if span == 0:
            return np.zeros_like(values) if direction == "forward" else np.full_like(values, lo)
        if direction == "forward":
            return (values - lo) / span
        return values * span + lo

    def scale_prospective(self, values: np.ndarray, direction: str = "forward") -> np.ndarray:
        idx = self.prospective_indices()
        lo = self.scaler.mins[idx]
        hi = self.scaler.maxs[idx]
        span = np.where(hi - lo == 0, 1.0, hi - lo)
        out = (values - lo) / span if direction == "forward" else values * span + lo
        out[..., hi - lo == 0] = 0.0 if direction == "forward" else lo[hi - lo == 0]
        return out


def c1_forecast(model: SerialModel, window: np.ndarray) -> np.ndarray:
    """Deterministic first-stage forecast of a scaled (L, m) input window."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.input_len, len(model.channels)):
        raise ShapeMismatch(
            f"expected ({model.input_len}, {len(model.channels)}) window, got {window.shape}"
        )
    return model.c1.forward(window)


def c2_refine(model: SerialModel, first_stage: np.ndarray, prospective: np.ndarray) -> np.ndarray:
    """Refine a first-stage forecast with prospective context channels."""
    if model.c2 is None:
        raise ShapeMismatch("model has no second stage")
    first_stage = np.asarray(first_stage, dtype=np.float64).reshape(-1)
    prospective = np.asarray(prospective, dtype=np.float64)
    if prospective.ndim == 1:
        prospective = prospective.reshape(-1, 1)
    if first_stage.shape[0] != model.horizon or prospective.shape[0] != model.horizon:
        raise LengthMismatch(
            f"first stage and prospective blocks must cover {model.horizon} steps"
        )
    expected = len(model.prospective_channels)
    if prospective.shape[1] != expected:
        raise ChannelMismatch(
            f"expected {expected} prospective channels, got {prospective.shape[1]}"
        )
    z = np.concatenate([first_stage[:, None], prospective], axis=1)
    return model.c2.forward(z)


def forecast(model: SerialModel, window: np.ndarray, prospective: Optional[np.ndarray] = None) -> np.ndarray:
    """Full forecast in scaled space: C1, then C2 when configured."""
    y = c1_forecast(model, window)
    if model.c2 is not None:
        if prospective is None:
            raise ChannelMismatch("second stage requires prospective channels")
        y = c2_refine(model, y, prospective)
    return y
