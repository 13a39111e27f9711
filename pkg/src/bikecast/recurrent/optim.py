"""First-order optimizers over named parameter dictionaries."""

from __future__ import annotations

import numpy as np


class SGD:
    def __init__(self, learning_rate: float):
        self.lr = learning_rate

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            params[name] -= self.lr * g


class RMSProp:
    def __init__(self, learning_rate: float, rho: float = 0.9, eps: float = 1e-8):
        self.lr = learning_rate
        self.rho = rho
        self.eps = eps
        self.sq: dict[str, np.ndarray] = {}

    def step(self, params, grads):
        for name, g in grads.items():
            sq = self.sq.setdefault(name, np.zeros_like(g))
            sq *= self.rho
            sq += (1 - self.rho) * g ** 2
            params[name] -= self.lr * g / (np.sqrt(sq) + self.eps)


class Adam:
    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = learning_rate
        self.b1 = beta1
        self.b2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params, grads):
        self.t += 1
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g ** 2
            m_hat = m / (1 - self.b1 ** self.t)
            v_hat = v / (1 - self.b2 ** self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "rmsprop": RMSProp, "adam": Adam}


def make_optimizer(name: str, learning_rate: float):
    if name not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {name!r} (choose from {sorted(OPTIMIZERS)})")
    return OPTIMIZERS[name](learning_rate)
