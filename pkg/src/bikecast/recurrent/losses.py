"""Training losses with analytic gradients w.r.t. the prediction batch."""

from __future__ import annotations

import numpy as np


def mse(y: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = y - target
    value = float(np.mean(diff ** 2))
    grad = 2.0 * diff / diff.size
    return value, grad


def mae(y: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = y - target
    value = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return value, grad


def cosine(y: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """1 - cosine similarity, averaged over the batch rows."""
    y2 = np.atleast_2d(y)
    t2 = np.atleast_2d(target)
    B = y2.shape[0]
    ny = np.linalg.norm(y2, axis=1, keepdims=True)
    nt = np.linalg.norm(t2, axis=1, keepdims=True)
    dot = np.sum(y2 * t2, axis=1, keepdims=True)
    sim = dot / (ny * nt)
    value = float(np.mean(1.0 - sim))
    grad = -(t2 / (ny * nt) - dot * y2 / (ny ** 3 * nt)) / B
    return value, grad.reshape(np.shape(y))


LOSSES = {"mse": mse, "mae": mae, "cosine": cosine}


def get_loss(name: str):
    if name not in LOSSES:
        raise ValueError(f"unknown loss {name!r} (choose from {sorted(LOSSES)})")
    return LOSSES[name]
