"""Classical and distance-based forecasters: triple exponential smoothing,
DTW distance, barycenters (Euclidean and DBA) and kNN forecasting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptySeries,
    EmptySet,
    EmptyTrain,
    KTooLarge,
    LengthMismatch,
    SeriesTooShort,
    UnfittedState,
)
from .segmentation import Instance


def _as2d(series) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def dtw(a, b, band: int | None = None) -> float:
    """Dynamic time warping distance.

    Local cost is the squared (per-channel summed) difference; the returned
    distance is the square root of the minimal accumulated cost, so aligned
    equal-length series reproduce the Euclidean distance.
    """
    cost, _ = _dtw_matrix(a, b, band)
    return float(np.sqrt(cost[-1, -1]))


def dtw_path(a, b, band: int | None = None) -> tuple[float, list[tuple[int, int]]]:
    """DTW distance together with one optimal warping path."""
    cost, n_m = _dtw_matrix(a, b, band)
    n, m = n_m
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((cost[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            candidates.append((cost[i - 1, j], (i - 1, j)))
        if j > 0:
            candidates.append((cost[i, j - 1], (i, j - 1)))
        _, (i, j) = min(candidates, key=lambda c: c[0])
        path.append((i, j))
    path.reverse()
    return float(np.sqrt(cost[-1, -1])), path


def _dtw_matrix(a, b, band: int | None) -> tuple[np.ndarray, tuple[int, int]]:
    a, b = _as2d(a), _as2d(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySeries("dtw requires non-empty series")
    if a.shape[1] != b.shape[1]:
        raise LengthMismatch("series differ in channel count")
    n, m = a.shape[0], b.shape[0]
    local = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    cost = np.full((n, m), np.inf)
    for i in range(n):
        lo, hi = 0, m
        if band is not None:
            lo = max(0, i - band)
            hi = min(m, i + band + 1)
        for j in range(lo, hi):
            c = local[i, j]
            if i == 0 and j == 0:
                cost[i, j] = c
            elif i == 0:
                cost[i, j] = c + cost[i, j - 1]
            elif j == 0:
                cost[i, j] = c + cost[i - 1, j]
            else:
                cost[i, j] = c + min(
                    cost[i - 1, j - 1], cost[i - 1, j], cost[i, j - 1]
                )
    return cost, (n, m)


def euclidean_barycenter(members: Sequence) -> np.ndarray:
    """Pointwise arithmetic mean of equal-length series."""
    if not members:
        raise EmptySet("no series to average")
    arrs = [np.asarray(s, dtype=np.float64) for s in members]
    if len({a.shape for a in arrs}) != 1:
        raise LengthMismatch("barycenter members differ in shape")
    return np.mean(arrs, axis=0)


def dba(
    members: Sequence, max_iters: int = 10, seed: int = 0, band: int | None = None
) -> np.ndarray:
    """DTW barycenter averaging.

    Starts from a seed-chosen member and alternates DTW alignment with
    pointwise averaging; stops when the sum of squared DTW distances stops
    decreasing (the update is reverted in that case) or at max_iters.
    """
    if not members:
        raise EmptySet("no series to average")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    arrs = [_as2d(s) for s in members]
    rng = np.random.default_rng(seed)
    center = arrs[int(rng.integers(len(arrs)))].copy()

    def objective(c):
        return sum(dtw(c, s, band) ** 2 for s in arrs)

    best = objective(center)
    for _ in range(max_iters):
        sums = np.zeros_like(center)
        counts = np.zeros(center.shape[0])
        for s in arrs:
            _, path = dtw_path(center, s, band)
            for i, j in path:
                sums[i] += s[j]
                counts[i] += 1
        candidate = sums / counts[:, None]
        cand_obj = objective(candidate)
        if cand_obj >= best - 1e-12:
            break
        center, best = candidate, cand_obj
    if center.shape[1] == 1 and _as2d(members[0]).shape == center.shape:
        pass
    return center if np.asarray(members[0]).ndim > 1 else center[:, 0]


def dba_objective_trace(
    members: Sequence, max_iters: int = 10, seed: int = 0
) -> list[float]:
    """Sum of squared DTW distances after the initialization and after each
    accepted update; exposed for monotonicity checks."""
    if not members:
        raise EmptySet("no series to average")
    arrs = [_as2d(s) for s in members]
    rng = np.random.default_rng(seed)
    center = arrs[int(rng.integers(len(arrs)))].copy()

    def objective(c):
        return sum(dtw(c, s) ** 2 for s in arrs)

    trace = [objective(center)]
    for _ in range(max_iters):
        sums = np.zeros_like(center)
        counts = np.zeros(center.shape[0])
        for s in arrs:
            _, path = dtw_path(center, s)
            for i, j in path:
                sums[i] += s[j]
                counts[i] += 1
        candidate = sums / counts[:, None]
        cand_obj = objective(candidate)
        if cand_obj >= trace[-1] - 1e-12:
            break
        center = candidate
        trace.append(cand_obj)
    return trace


def knn_forecast(
    train: Sequence[Instance],
    query_input: np.ndarray,
    k: int,
    distance: str = "euclidean",
    combiner: str = "euclidean-mean",
    band: int | None = None,
) -> np.ndarray:
    """Forecast as the barycenter of the outputs of the k nearest inputs.

    Ties in distance break toward the earlier instance origin.
    """
    if not train:
        raise EmptyTrain("no training instances")
    if not (1 <= k <= len(train)):
        raise KTooLarge(f"k={k} outside [1, {len(train)}]")
    if distance not in ("euclidean", "dtw"):
        raise ValueError(f"unknown distance {distance!r}")
    if combiner not in ("euclidean-mean", "dtw-dba"):
        raise ValueError(f"unknown combiner {combiner!r}")
    query = np.asarray(query_input, dtype=np.float64)

    scored = []
    for idx, inst in enumerate(train):
        x = inst.input.values
        if distance == "euclidean":
            if x.shape != _as2d(query).shape:
                raise LengthMismatch("query and instance inputs differ in shape")
            d = float(np.sqrt(((x - _as2d(query)) ** 2).sum()))
        else:
            d = dtw(x, query, band)
        scored.append((d, inst.origin, idx))
    scored.sort(key=lambda s: (s[0], s[1]))
    # combine in training order so the result is independent of the
    # distance-derived ordering (k = |train| then matches the barycenter
    # of all outputs bit for bit)
    chosen = sorted(idx for _, _, idx in scored[:k])
    outputs = [train[idx].output.values[:, 0] for idx in chosen]
    if combiner == "euclidean-mean":
        return euclidean_barycenter(outputs)
    return dba(outputs, max_iters=10, seed=0, band=band)


@dataclass
class HoltWintersState:
    """Fitted level/trend/seasonal state of triple exponential smoothing."""

    alpha: float
    beta: float
    gamma: float
    period: int
    level: float
    trend: float
    seasonal: np.ndarray  # last `period` seasonal values, oldest first
    mode: str = "multiplicative"
    fitted: bool = True


def holt_winters_fit(
    series,
    period: int,
    alpha: float,
    beta: float,
    gamma: float,
    mode: str = "multiplicative",
    eps: float = 1e-9,
) -> HoltWintersState:
    """Fit level, trend and seasonal components by direct recursion.

    Initialization uses the first two seasons: level = mean of season one,
    trend = difference of season means / period, seasonal factors from the
    first season. ``eps`` guards multiplicative divisions on zero-valued data.
    """
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    if mode not in ("multiplicative", "additive"):
        raise ValueError(f"unknown mode {mode!r}")
    if period < 1:
        raise ValueError("period must be >= 1")
    if x.shape[0] < 2 * period:
        raise SeriesTooShort(f"need at least {2 * period} points, got {x.shape[0]}")
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")

    season1 = x[:period].mean()
    season2 = x[period : 2 * period].mean()
    level = season1
    trend = (season2 - season1) / period
    if mode == "multiplicative":
        seasonal = list(x[:period] / (level if abs(level) > eps else eps))
    else:
        seasonal = list(x[:period] - level)

    for t in range(period, x.shape[0]):
        s_lag = seasonal[t - period]
        prev_level, prev_trend = level, trend
        if mode == "multiplicative":
            denom = s_lag if abs(s_lag) > eps else eps
            level = alpha * x[t] / denom + (1 - alpha) * (prev_level + prev_trend)
            trend = beta * (level - prev_level) + (1 - beta) * prev_trend
            base = prev_level + prev_trend
            base = base if abs(base) > eps else eps
            seasonal.append(gamma * x[t] / base + (1 - gamma) * s_lag)
        else:
            level = alpha * (x[t] - s_lag) + (1 - alpha) * (prev_level + prev_trend)
            trend = beta * (level - prev_level) + (1 - beta) * prev_trend
            seasonal.append(gamma * (x[t] - (prev_level + prev_trend)) + (1 - gamma) * s_lag)

    return HoltWintersState(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        period=period,
        level=level,
        trend=trend,
        seasonal=np.asarray(seasonal[-period:]),
        mode=mode,
    )


def holt_winters_forecast(state: HoltWintersState, h: int) -> np.ndarray:
    """Project the fitted state h steps ahead using the last seasonal cycle."""
    if not state.fitted:
        raise UnfittedState("state has not been fitted")
    if h < 1:
        raise ValueError("h must be >= 1")
    d = state.period
    out = np.empty(h)
    for j in range(1, h + 1):
        # seasonal index j - d*(k+1) with k = floor((j-1)/d) lands on the
        # stored last season at offset (j-1) mod d
        s = state.seasonal[(j - 1) % d]
        base = state.level + j * state.trend
        out[j - 1] = base * s if state.mode == "multiplicative" else base + s
    return out


def holt_winters_search(
    series,
    period: int,
    h: int,
    validation,
    budget: int = 20,
    seed: int = 0,
    mode: str = "multiplicative",
) -> tuple[float, float, float]:
    """Seeded random search over smoothing factors minimizing validation MAE.

    ``validation`` is the h-step continuation of ``series``.
    """
    rng = np.random.default_rng(seed)
    target = np.asarray(validation, dtype=np.float64).reshape(-1)
    best = None
    best_mae = np.inf
    for _ in range(max(budget, 1)):
        a, b, g = rng.uniform(0, 1, size=3)
        try:
            state = holt_winters_fit(series, period, a, b, g, mode=mode)
            mae = float(np.abs(holt_winters_forecast(state, h) - target).mean())
        except (SeriesTooShort, FloatingPointError, OverflowError):
            continue
        if np.isfinite(mae) and mae < best_mae:
            best, best_mae = (a, b, g), mae
    if best is None:
        best = (0.3, 0.1, 0.1)
    return best
