"""Mini-batch training with early stopping, gradient checking and seeded
random hyperparameter search."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DivergedLoss, EmptySpace, EmptySplit
from ..segmentation import Fold, Instance
from . import cells
from .losses import get_loss
from .model import SequenceRegressor, SerialModel, c1_forecast
from .optim import make_optimizer


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "mse"
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 8
    max_epochs: int = 50
    patience: int = 5
    dropout_rate: float = 0.0
    l1_weight: float = 0.0
    seed: int = 0
    hidden_c1: int = 64
    hidden_c2: int = 32
    cell_c1: str = "lstm"
    cell_c2: str = "lstm"
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.l1_weight < 0:
            raise ValueError("l1_weight must be non-negative")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


def _l1_penalty(params: dict[str, np.ndarray], weight: float) -> float:
    if weight == 0.0:
        return 0.0
    return weight * sum(float(np.abs(v).sum()) for v in params.values())


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> None:
    if max_norm <= 0:
        return
    total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor


def train_regressor(
    reg: SequenceRegressor,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig,
) -> TrainHistory:
    """Mini-batch BPTT training with early stopping on validation loss.

    Returns the per-epoch history; the regressor is left holding the weights
    of the best validation epoch.
    """
    if len(x_train) == 0 or len(x_val) == 0:
        raise EmptySplit("training and validation sets must be non-empty")
    loss_fn = get_loss(config.loss)
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    best_val = np.inf
    best_params = None
    stale = 0

    n = len(x_train)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_losses = []
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            y = reg.forward(x_train[idx], train=True, rng=rng)
            value, dy = loss_fn(y, y_train[idx])
            value += _l1_penalty(reg.params, config.l1_weight)
            if not np.isfinite(value):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            grads = reg.backward(dy)
            if config.l1_weight > 0.0:
                for name, p in reg.params.items():
                    grads[name] = grads[name] + config.l1_weight * np.sign(p)
            _clip_global_norm(grads, config.clip_norm)
            optimizer.step(reg.params, grads)
            epoch_losses.append(value)
        history.train_loss.append(float(np.mean(epoch_losses)))

        val_pred = reg.forward(x_val)
        val_value, _ = loss_fn(val_pred, y_val)
        if not np.isfinite(val_value):
            raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        history.val_loss.append(float(val_value))

        if val_value < best_val:
            best_val = val_value
            best_params = {k: v.copy() for k, v in reg.params.items()}
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    if best_params is not None:
        for k in reg.params:
            reg.params[k][...] = best_params[k]
    return history


def build_serial_model(
    channels: Sequence[str],
    target_channel: str,
    prospective_channels: Sequence[str],
    input_len: int,
    horizon: int,
    scaler,
    config: TrainConfig,
    with_c2: bool = False,
) -> SerialModel:
    """Construct an untrained serial model with seeded initial weights."""
    rng = np.random.default_rng(config.seed)
    c1_cell = cells.init_cell(config.cell_c1, len(channels), config.hidden_c1, rng)
    c1 = SequenceRegressor(
        c1_cell, horizon, "final", dropout_rate=config.dropout_rate, rng=rng
    )
    c2 = None
    if with_c2:
        width = 1 + len(prospective_channels)
        c2_cell = cells.init_cell(config.cell_c2, width, config.hidden_c2, rng)
        c2 = SequenceRegressor(
            c2_cell, 1, "step", dropout_rate=config.dropout_rate, rng=rng
        )
    return SerialModel(
        c1=c1,
        c2=c2,
        scaler=scaler,
        channels=tuple(channels),
        target_channel=target_channel,
        prospective_channels=tuple(prospective_channels),
        input_len=input_len,
        horizon=horizon,
        config={f.name: getattr(config, f.name) for f in fields(config)},
    )


def instance_arrays(
    model: SerialModel, instances: Sequence[Instance]
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Scaled (inputs, targets, prospective) arrays for a list of instances."""
    xs = np.stack([model.scale_inputs(inst.input.values) for inst in instances])
    ys = np.stack(
        [model.scale_target(inst.output.values[:, 0]) for inst in instances]
    )
    ps = None
    if model.prospective_channels:
        ps = np.stack(
            [model.scale_prospective(inst.prospective.values) for inst in instances]
        )
    return xs, ys, ps


def train(model: SerialModel, fold: Fold, config: TrainConfig) -> dict[str, TrainHistory]:
    """Train the serial model on one fold.

    C1 learns the horizon from input windows; C2 (when present) is trained
    afterwards on C1's inference-mode forecasts joined with the prospective
    channels, targeting the true horizon.
    """
    if not fold.train or not fold.validation:
        raise EmptySplit("fold must have non-empty train and validation splits")
    x_tr, y_tr, p_tr = instance_arrays(model, fold.train)
    x_va, y_va, p_va = instance_arrays(model, fold.validation)

    histories = {"c1": train_regressor(model.c1, x_tr, y_tr, x_va, y_va, config)}

    if model.c2 is not None:
        c1_tr = model.c1.forward(x_tr)
        c1_va = model.c1.forward(x_va)
        z_tr = np.concatenate([c1_tr[:, :, None], p_tr], axis=2)
        z_va = np.concatenate([c1_va[:, :, None], p_va], axis=2)
        histories["c2"] = train_regressor(model.c2, z_tr, y_tr, z_va, y_va, config)
    return histories


def gradient_check(
    reg: SequenceRegressor,
    x: np.ndarray,
    y: np.ndarray,
    loss: str = "mse",
    l1_weight: float = 0.0,
    eps: float = 1e-5,
) -> float:
    """Max relative error between BPTT and central finite differences."""
    loss_fn = get_loss(loss)

    def objective() -> float:
        pred = reg.forward(x)
        value, _ = loss_fn(pred, y)
        return value + _l1_penalty(reg.params, l1_weight)

    pred = reg.forward(x)
    _, dy = loss_fn(pred, y)
    analytic = reg.backward(dy)
    if l1_weight > 0.0:
        for name, p in reg.params.items():
            analytic[name] = analytic[name] + l1_weight * np.sign(p)

    worst = 0.0
    for name, p in reg.params.items():
        flat = p.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + eps
            up = objective()
            flat[i] = original - eps
            down = objective()
            flat[i] = original
            gn = (up - down) / (2 * eps)
            denom = max(abs(ga[i]), abs(gn), 1e-8)
            worst = max(worst, abs(ga[i] - gn) / denom)
    return worst


SEARCHABLE = {
    "learning_rate",
    "batch_size",
    "dropout_rate",
    "l1_weight",
    "hidden_c1",
    "hidden_c2",
    "loss",
    "optimizer",
    "cell_c1",
    "cell_c2",
}


def sample_config(
    space: dict, rng: np.random.Generator, base: TrainConfig
) -> TrainConfig:
    """Draw one configuration uniformly from the search space.

    Space entries: ("log", lo, hi) for log-uniform reals, ("lin", lo, hi)
    for uniform reals, ("int", lo, hi) for uniform integers, or a list of
    choices.
    """
    updates = {}
    for key in sorted(space):
        if key not in SEARCHABLE:
            raise EmptySpace(f"unknown search dimension {key!r}")
        spec = space[key]
        if isinstance(spec, (list, tuple)) and spec and spec[0] == "log":
            updates[key] = float(np.exp(rng.uniform(np.log(spec[1]), np.log(spec[2]))))
        elif isinstance(spec, (list, tuple)) and spec and spec[0] == "lin":
            updates[key] = float(rng.uniform(spec[1], spec[2]))
        elif isinstance(spec, (list, tuple)) and spec and spec[0] == "int":
            updates[key] = int(rng.integers(spec[1], spec[2] + 1))
        elif isinstance(spec, (list, tuple)):
            updates[key] = spec[int(rng.integers(len(spec)))]
        else:
            raise EmptySpace(f"bad specification for dimension {key!r}: {spec}")
    return replace(base, **updates)


def random_search(
    space: dict,
    budget: int,
    evaluate: Callable[[TrainConfig], float],
    seed: int = 0,
    base: Optional[TrainConfig] = None,
) -> tuple[TrainConfig, float]:
    """Sample ``budget`` configurations and keep the lowest validation MAE.

    Ties resolve to the earliest sampled configuration.
    """
    if not space:
        raise EmptySpace("empty search space")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    base = base if base is not None else TrainConfig()
    rng = np.random.default_rng(seed)
    best_config = None
    best_score = np.inf
    for _ in range(budget):
        config = sample_config(space, rng, base)
        score = evaluate(config)
        if score < best_score:
            best_config, best_score = config, score
    assert best_config is not None
    return best_config, best_score


def validation_mae(model: SerialModel, fold: Fold) -> float:
    """Scaled-space MAE of the trained model over the validation split."""
    x_va, y_va, p_va = instance_arrays(model, fold.validation)
    pred = model.c1.forward(x_va)
    if model.c2 is not None:
        z = np.concatenate([pred[:, :, None], p_va], axis=2)
        pred = model.c2.forward(z)
    return float(np.mean(np.abs(pred - y_va)))


def search_train_config(
    space: dict,
    budget: int,
    fold: Fold,
    seed: int,
    base: TrainConfig,
    channels: Sequence[str],
    target_channel: str,
    prospective_channels: Sequence[str],
    input_len: int,
    horizon: int,
    scaler,
    with_c2: bool = False,
) -> TrainConfig:
    """Random search driver that trains a fresh serial model per sample."""

    def evaluate(config: TrainConfig) -> float:
        model = build_serial_model(
            channels,
            target_channel,
            prospective_channels,
            input_len,
            horizon,
            scaler,
            config,
            with_c2=with_c2,
        )
        train(model, fold, config)
        return validation_mae(model, fold)

    best, _ = random_search(space, budget, evaluate, seed=seed, base=base)
    return best
