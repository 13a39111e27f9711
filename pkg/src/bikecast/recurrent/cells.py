"""LSTM and GRU cells with explicit forward caches and backpropagation
through time."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteInput, ShapeMismatch

LSTM_GATES = ("f", "i", "o", "g")
GRU_GATES = ("z", "r", "g")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class RecurrentCell:
    """Gated recurrent cell parameters.

    LSTM gates: forget, input, output and candidate; GRU gates: update,
    reset and candidate. Per gate: input weights W (m, H), recurrent
    weights U (H, H) and bias b (H,).
    """

    kind: str
    input_dim: int
    hidden_dim: int
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def gate_names(self) -> tuple[str, ...]:
        return LSTM_GATES if self.kind == "lstm" else GRU_GATES


def init_cell(kind: str, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> RecurrentCell:
    """Seeded uniform initialization in +-1/sqrt(H)."""
    if kind not in ("lstm", "gru"):
        raise ValueError(f"unknown cell kind {kind!r}")
    scale = 1.0 / np.sqrt(hidden_dim)
    cell = RecurrentCell(kind, input_dim, hidden_dim)
    gates = LSTM_GATES if kind == "lstm" else GRU_GATES
    for gate in gates:
        cell.params[f"W{gate}"] = rng.uniform(-scale, scale, (input_dim, hidden_dim))
        cell.params[f"U{gate}"] = rng.uniform(-scale, scale, (hidden_dim, hidden_dim))
        cell.params[f"b{gate}"] = np.zeros(hidden_dim)
    return cell


def _check_input(cell: RecurrentCell, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None, :, :]
    if x.ndim != 3 or x.shape[2] != cell.input_dim:
        raise ShapeMismatch(
            f"expected (batch, steps, {cell.input_dim}) input, got {x.shape}"
        )
    if not np.isfinite(x).all():
        raise NonFiniteInput("input sequence contains non-finite values")
    return x


def forward(cell: RecurrentCell, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the gated recursion over a (B, L, m) batch.

    Returns the hidden sequence (B, L, H) and the per-step cache needed by
    :func:`backward`.
    """
    x = _check_input(cell, x)
    if cell.kind == "lstm":
        return _lstm_forward(cell, x)
    return _gru_forward(cell, x)


def _lstm_forward(cell, x):
    p = cell.params
    B, L, _ = x.shape
    H = cell.hidden_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.empty((B, L, H))
    cache = []
    for t in range(L):
        xt = x[:, t, :]
        f = _sigmoid(xt @ p["Wf"] + h @ p["Uf"] + p["bf"])
        i = _sigmoid(xt @ p["Wi"] + h @ p["Ui"] + p["bi"])
        o = _sigmoid(xt @ p["Wo"] + h @ p["Uo"] + p["bo"])
        g = np.tanh(xt @ p["Wg"] + h @ p["Ug"] + p["bg"])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((xt, h, c, f, i, o, g, tc))
        h, c = h_new, c_new
        hs[:, t, :] = h
    return hs, cache


def _gru_forward(cell, x):
    p = cell.params
    B, L, _ = x.shape
    H = cell.hidden_dim
    h = np.zeros((B, H))
    hs = np.empty((B, L, H))
    cache = []
    for t in range(L):
        xt = x[:, t, :]
        z = _sigmoid(xt @ p["Wz"] + h @ p["Uz"] + p["bz"])
        r = _sigmoid(xt @ p["Wr"] + h @ p["Ur"] + p["br"])
        g = np.tanh(xt @ p["Wg"] + (r * h) @ p["Ug"] + p["bg"])
        h_new = z * h + (1 - z) * g
        cache.append((xt, h, z, r, g))
        h = h_new
        hs[:, t, :] = h
    return hs, cache


def backward(
    cell: RecurrentCell, cache: list, dh_seq: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Backpropagate through time.

    ``dh_seq`` (B, L, H) holds the loss gradient w.r.t. each emitted hidden
    state. Returns parameter gradients and the gradient w.r.t. the inputs.
    """
    if cell.kind == "lstm":
        return _lstm_backward(cell, cache, dh_seq)
    return _gru_backward(cell, cache, dh_seq)


def _lstm_backward(cell, cache, dh_seq):
    p = cell.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    B, L, H = dh_seq.shape
    dx = np.empty((B, L, cell.input_dim))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(L)):
        xt, h_prev, c_prev, f, i, o, g, tc = cache[t]
        dh = dh_seq[:, t, :] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1 - tc ** 2)
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        da_f = df * f * (1 - f)
        da_i = di * i * (1 - i)
        da_o = do * o * (1 - o)
        da_g = dg * (1 - g ** 2)
        dc_next = dc * f
        dh_next = np.zeros_like(dh)
        dxt = np.zeros_like(xt)
        for gate, da in zip(LSTM_GATES, (da_f, da_i, da_o, da_g)):
            grads[f"W{gate}"] += xt.T @ da
            grads[f"U{gate}"] += h_prev.T @ da
            grads[f"b{gate}"] += da.sum(axis=0)
            dh_next += da @ p[f"U{gate}"].T
            dxt += da @ p[f"W{gate}"].T
        dx[:, t, :] = dxt
    return grads, dx


def _gru_backward(cell, cache, dh_seq):
    p = cell.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    B, L, H = dh_seq.shape
    dx = np.empty((B, L, cell.input_dim))
    dh_next = np.zeros((B, H))
    for t in reversed(range(L)):
        xt, h_prev, z, r, g = cache[t]
        dh = dh_seq[:, t, :] + dh_next
        dz = dh * (h_prev - g)
        dg = dh * (1 - z)
        da_z = dz * z * (1 - z)
        da_g = dg * (1 - g ** 2)
        drh = da_g @ p["Ug"].T
        dr = drh * h_prev
        da_r = dr * r * (1 - r)

        grads["Wz"] += xt.T @ da_z
        grads["Uz"] += h_prev.T @ da_z
        grads["bz"] += da_z.sum(axis=0)
        grads["Wr"] += xt.T @ da_r
        grads["Ur"] += h_prev.T @ da_r
        grads["br"] += da_r.sum(axis=0)
        grads["Wg"] += xt.T @ da_g
        grads["Ug"] += (r * h_prev).T @ da_g
        grads["bg"] += da_g.sum(axis=0)

        dh_next = (
            dh * z
            + da_z @ p["Uz"].T
            + da_r @ p["Ur"].T
            + drh * r
        )
        dx[:, t, :] = da_z @ p["Wz"].T + da_r @ p["Wr"].T + da_g @ p["Wg"].T
    return grads, dx


def _single_sequence(cell: RecurrentCell, kind: str, x: np.ndarray) -> np.ndarray:
    if cell.kind != kind:
        raise ShapeMismatch(f"cell kind is {cell.kind!r}, expected {kind}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected a single (steps, channels) sequence, got {x.shape}")
    hs, _ = forward(cell, x)
    return hs[0]


def lstm_forward(cell: RecurrentCell, x: np.ndarray) -> np.ndarray:
    """Hidden sequence (L, H) of an LSTM cell over a single (L, m) input."""
    return _single_sequence(cell, "lstm", x)


def gru_forward(cell: RecurrentCell, x: np.ndarray) -> np.ndarray:
    """Hidden sequence (L, H) of a GRU cell over a single (L, m) input."""
    return _single_sequence(cell, "gru", x)
