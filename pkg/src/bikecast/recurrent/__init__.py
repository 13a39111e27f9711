"""From-scratch recurrent forecasting engine."""

from .cells import RecurrentCell, gru_forward, init_cell, lstm_forward
from .losses import get_loss
from .model import SequenceRegressor, SerialModel, c1_forecast, c2_refine, forecast
from .persist import load_model, save_model
from .training import (
    TrainConfig,
    TrainHistory,
    build_serial_model,
    gradient_check,
    random_search,
    train,
    train_regressor,
)

__all__ = [
    "RecurrentCell",
    "SequenceRegressor",
    "SerialModel",
    "TrainConfig",
    "TrainHistory",
    "build_serial_model",
    "c1_forecast",
    "c2_refine",
    "forecast",
    "get_loss",
    "gradient_check",
    "gru_forward",
    "init_cell",
    "load_model",
    "lstm_forward",
    "random_search",
    "save_model",
    "train",
    "train_regressor",
]
