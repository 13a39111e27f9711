"""Time-series data model: resampling, alignment, scaling, aggregation and
check-in/check-out inference from station load."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    ChannelMismatch,
    DuplicateChannel,
    EmptyRange,
    EmptySubset,
    LoadExceedsCapacity,
    NonCommensurableResolution,
)


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled multivariate series.

    Row t is the observation at ``start + t * resolution``. Values are stored
    as a read-only (T, m) float array.
    """

    start: datetime
    resolution: timedelta
    channels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", _as_utc(self.start))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2:
            raise ValueError("values must be a T x m matrix")
        if vals.shape[0] < 1:
            raise ValueError("series must contain at least one observation")
        if vals.shape[1] != len(self.channels):
            raise ValueError("channel count does not match value columns")
        if len(set(self.channels)) != len(self.channels):
            raise DuplicateChannel(f"duplicate channel names in {self.channels}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def end(self) -> datetime:
        """Timestamp one step past the last observation."""
        return self.start + self.length * self.resolution

    def timestamps(self) -> list[datetime]:
        return [self.start + t * self.resolution for t in range(self.length)]

    def channel(self, name: str) -> np.ndarray:
        if name not in self.channels:
            raise ChannelMismatch(f"unknown channel {name!r}")
        return self.values[:, self.channels.index(name)]

    def select(self, names: Sequence[str]) -> "TimeSeries":
        idx = [self.channels.index(n) for n in names]
        return TimeSeries(self.start, self.resolution, tuple(names), self.values[:, idx])

    def slice(self, lo: int, hi: int) -> "TimeSeries":
        if not (0 <= lo < hi <= self.length):
            raise EmptyRange(f"bad slice [{lo}, {hi}) for length {self.length}")
        return TimeSeries(
            self.start + lo * self.resolution,
            self.resolution,
            self.channels,
            self.values[lo:hi],
        )


@dataclass(frozen=True)
class ScalerParams:
    """Per-channel min/max learned from a training index range."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64).copy()
        maxs = np.asarray(self.maxs, dtype=np.float64).copy()
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins/maxs must be matching 1-d arrays")
        if np.any(maxs < mins):
            raise ValueError("max < min in scaler params")
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def width(self) -> int:
        return self.mins.shape[0]


@dataclass(frozen=True)
class Station:
    """Docking station with a (timestamp, dock count) capacity history."""

    id: str
    latitude: float
    longitude: float
    capacity: tuple[tuple[datetime, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        cap = tuple((_as_utc(ts), int(c)) for ts, c in self.capacity)
        for _, c in cap:
            if c <= 0:
                raise ValueError("capacity counts must be positive")
        for (a, _), (b, _) in zip(cap, cap[1:]):
            if b <= a:
                raise ValueError("capacity timestamps must be strictly increasing")
        object.__setattr__(self, "capacity", cap)

    def capacity_at(self, ts: datetime) -> int:
        ts = _as_utc(ts)
        if not self.capacity:
            raise ValueError(f"station {self.id} has no capacity records")
        current = self.capacity[0][1]
        for when, count in self.capacity:
            if when <= ts:
                current = count
            else:
                break
        return current


def resample(ts: TimeSeries, target: timedelta, agg: str = "mean") -> TimeSeries:
    """Change resolution by binning (sum/mean) or repetition upsampling."""
    if agg not in ("sum", "mean", "repeat-upsample"):
        raise ValueError(f"unknown aggregation {agg!r}")
    src_us = int(ts.resolution / timedelta(microseconds=1))
    dst_us = int(target / timedelta(microseconds=1))
    if dst_us == src_us:
        return ts
    if dst_us > src_us:
        if dst_us % src_us != 0:
            raise NonCommensurableResolution(f"{target} not a multiple of {ts.resolution}")
        factor = dst_us // src_us
        bins = ts.length // factor
        if bins < 1:
            raise NonCommensurableResolution("series shorter than one target bin")
        chunk = ts.values[: bins * factor].reshape(bins, factor, ts.width)
        if agg == "repeat-upsample":
            raise ValueError("repeat-upsample cannot coarsen resolution")
        out = chunk.sum(axis=1) if agg == "sum" else chunk.mean(axis=1)
        return TimeSeries(ts.start, target, ts.channels, out)
    if src_us % dst_us != 0:
        raise NonCommensurableResolution(f"{ts.resolution} not a multiple of {target}")
    factor = src_us // dst_us
    out = np.repeat(ts.values, factor, axis=0)
    return TimeSeries(ts.start, target, ts.channels, out)


def join_channels(*series: TimeSeries) -> TimeSeries:
    """Concatenate channels of aligned series in argument order."""
    if not series:
        raise ValueError("join_channels requires at least one series")
    first = series[0]
    for s in series[1:]:
        if s.start != first.start or s.resolution != first.resolution or s.length != first.length:
            raise AlignmentError("series differ in start, resolution or length")
    names: list[str] = []
    for s in series:
        for n in s.channels:
            if n in names:
                raise DuplicateChannel(f"channel {n!r} appears more than once")
            names.append(n)
    values = np.concatenate([s.values for s in series], axis=1)
    return TimeSeries(first.start, first.resolution, tuple(names), values)


def fit_minmax(ts: TimeSeries, train_range: tuple[int, int]) -> ScalerParams:
    """Learn per-channel min/max over ``[lo, hi)`` only."""
    lo, hi = train_range
    if not (0 <= lo < hi <= ts.length):
        raise EmptyRange(f"train range [{lo}, {hi}) invalid for length {ts.length}")
    chunk = ts.values[lo:hi]
    return ScalerParams(chunk.min(axis=0), chunk.max(axis=0))


def scale(ts: TimeSeries, params: ScalerParams, direction: str = "forward") -> TimeSeries:
    """Min-max map (or its exact inverse); no clipping, constant channels map to 0."""
    if params.width != ts.width:
        raise ChannelMismatch(f"scaler has {params.width} channels, series has {ts.width}")
    span = params.maxs - params.mins
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    if direction == "forward":
        out = (ts.values - params.mins) / safe_span
        out[:, constant] = 0.0
    elif direction == "inverse":
        out = ts.values * safe_span + params.mins
        out[:, constant] = params.mins[constant]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return TimeSeries(ts.start, ts.resolution, ts.channels, out)


def scale_array(values: np.ndarray, params: ScalerParams, direction: str = "forward") -> np.ndarray:
    """Array-level variant of :func:`scale` for model internals."""
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 1
    if squeeze:
        values = values.reshape(-1, 1)
    if values.shape[-1] != params.width:
        raise ChannelMismatch(f"expected {params.width} channels, got {values.shape[-1]}")
    span = params.maxs - params.mins
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    if direction == "forward":
        out = (values - params.mins) / safe_span
        out[..., constant] = 0.0
    elif direction == "inverse":
        out = values * safe_span + params.mins
        out[..., constant] = params.mins[constant]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return out[:, 0] if squeeze else out


def aggregate_stations(
    per_station: Mapping[str, TimeSeries], subset: Iterable[str]
) -> TimeSeries:
    """Pointwise sum of aligned per-station series over a station subset."""
    ids = sorted(set(subset))
    if not ids:
        raise EmptySubset("station subset is empty")
    missing = [i for i in ids if i not in per_station]
    if missing:
        raise EmptySubset(f"unknown stations {missing}")
    series = [per_station[i] for i in ids]
    first = series[0]
    total = np.zeros_like(first.values)
    for s in series:
        if (
            s.start != first.start
            or s.resolution != first.resolution
            or s.length != first.length
            or s.channels != first.channels
        ):
            raise AlignmentError("per-station series are not aligned")
        total = total + s.values
    return TimeSeries(first.start, first.resolution, first.channels, total)


def infer_flows(load: TimeSeries, station: Station) -> tuple[TimeSeries, TimeSeries]:
    """Decompose station load differences into check-ins and check-outs.

    Steps where a capacity change takes effect contribute zero to both flows.
    """
    if load.width != 1:
        raise ChannelMismatch("load series must be univariate")
    values = load.values[:, 0]
    stamps = load.timestamps()
    for t, (v, ts) in enumerate(zip(values, stamps)):
        cap = station.capacity_at(ts)
        if v < 0 or v > cap:
            raise LoadExceedsCapacity(
                f"load {v} outside [0, {cap}] at step {t} of station {station.id}"
            )
    change_times = {when for when, _ in station.capacity[1:]}
    checkins = np.zeros(load.length)
    checkouts = np.zeros(load.length)
    for t in range(1, load.length):
        prev, cur = stamps[t - 1], stamps[t]
        if any(prev < when <= cur for when in change_times):
            continue
        d = values[t] - values[t - 1]
        checkins[t] = max(d, 0.0)
        checkouts[t] = max(-d, 0.0)
    mk = lambda name, v: TimeSeries(load.start, load.resolution, (name,), v.reshape(-1, 1))
    return mk("checkins", checkins), mk("checkouts", checkouts)
