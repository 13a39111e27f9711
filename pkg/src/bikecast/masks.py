"""Context channels appended to demand series: calendrical, situational,
meteorological and spatial (nearby-station occupation) masks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Mapping, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .errors import (
    EmptyTargetSet,
    MissingVariable,
    NoStations,
    OverlappingBins,
)
from .series import Station, TimeSeries, join_channels, resample

WEEKDAY_NAMES = (
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
)

#: One code per weekday, monday = 0.
DAY_IDENTITY: dict[str, int] = {name: i for i, name in enumerate(WEEKDAY_NAMES)}

#: Lower-cardinality mapping: all weekdays share a code, weekend days split.
DAY_WEEKDAY_SAT_SUN: dict[str, int] = {
    **{name: 0 for name in WEEKDAY_NAMES[:5]},
    "saturday": 1,
    "sunday": 2,
}

#: Four six-hour bins: dawn, morning, afternoon, evening.
HOUR_QUARTERS: tuple[tuple[float, float, int], ...] = (
    (0.0, 6.0, 0),
    (6.0, 12.0, 1),
    (12.0, 18.0, 2),
    (18.0, 24.0, 3),
)


@dataclass(frozen=True)
class MaskChannel:
    """A derived context channel aligned with a target series."""

    name: str
    values: np.ndarray
    kind: str  # categorical-code | binary | magnitude | ratio | continuous

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1).copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class EventRecord:
    """Public event with a location, intensity and active interval."""

    start: datetime
    end: datetime
    location: tuple[float, float]
    magnitude: int
    label: str = ""

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("event end must follow start")
        if self.magnitude < 1:
            raise ValueError("event magnitude must be >= 1")


@dataclass(frozen=True)
class NearbyMaskSpec:
    """Inputs for the nearby-station occupation mask."""

    target_ids: tuple[str, ...]
    stations: tuple[Station, ...]
    radius: float
    series: TimeSeries
    loads: Mapping[str, TimeSeries]
    use_haversine: bool = False


def _local(ts: datetime, tz: ZoneInfo) -> datetime:
    return ts.astimezone(tz)


def day_mask(
    timestamps: Sequence[datetime], mapping: Mapping[str, int], tz: ZoneInfo
) -> MaskChannel:
    """Weekday code of each observation under the given timezone."""
    missing = set(WEEKDAY_NAMES) - set(mapping)
    if missing:
        raise ValueError(f"day mapping missing weekdays: {sorted(missing)}")
    codes = [mapping[WEEKDAY_NAMES[_local(ts, tz).weekday()]] for ts in timestamps]
    return MaskChannel("day", np.asarray(codes, dtype=float), "categorical-code")


def holiday_mask(
    timestamps: Sequence[datetime], holidays: set[date], tz: ZoneInfo
) -> MaskChannel:
    """1 iff the local date is a listed holiday."""
    flags = [1.0 if _local(ts, tz).date() in holidays else 0.0 for ts in timestamps]
    return MaskChannel("holiday", np.asarray(flags), "binary")


def hour_mask(
    timestamps: Sequence[datetime],
    bins: Sequence[tuple[float, float, int]],
    tz: ZoneInfo,
) -> MaskChannel:
    """Code of the hour bin containing the local time of day.

    Bins are (start_hour, end_hour, code) half-open intervals that must
    partition [0, 24).
    """
    ordered = sorted(bins)
    cursor = 0.0
    for lo, hi, _ in ordered:
        if lo != cursor or hi <= lo:
            raise OverlappingBins(f"bins do not partition [0, 24): gap or overlap at {lo}")
        cursor = hi
    if cursor != 24.0:
        raise OverlappingBins(f"bins stop at {cursor}, expected 24")
    codes = []
    for ts in timestamps:
        local = _local(ts, tz)
        hour = local.hour + local.minute / 60.0 + local.second / 3600.0
        for lo, hi, code in ordered:
            if lo <= hour < hi:
                codes.append(float(code))
                break
    return MaskChannel("hour", np.asarray(codes), "categorical-code")


def period_mask(
    timestamps: Sequence[datetime],
    intervals: Sequence[tuple[date, date]],
    tz: ZoneInfo,
    name: str = "period",
) -> MaskChannel:
    """1 iff the local date falls inside any (inclusive) date interval."""
    for lo, hi in intervals:
        if hi < lo:
            raise ValueError(f"interval {lo}..{hi} ends before it starts")
    flags = []
    for ts in timestamps:
        d = _local(ts, tz).date()
        flags.append(1.0 if any(lo <= d <= hi for lo, hi in intervals) else 0.0)
    return MaskChannel(name, np.asarray(flags), "binary")


def _coord_distance(a: tuple[float, float], b: tuple[float, float], haversine: bool) -> float:
    if not haversine:
        return math.hypot(a[0] - b[0], a[1] - b[1])
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    s = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * 6371.0 * math.asin(math.sqrt(s))


def event_mask(
    timestamps: Sequence[datetime],
    events: Sequence[EventRecord],
    location: tuple[float, float],
    max_dist: float,
    ramp_steps: int = 1,
) -> MaskChannel:
    """Magnitude channel for events within ``max_dist`` of the location.

    An in-range event contributes its magnitude during [start, end] and a
    value-1 shoulder of ``ramp_steps`` steps before and after; overlapping
    contributions combine by pointwise max.
    """
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    if ramp_steps < 0:
        raise ValueError("ramp_steps must be non-negative")
    n = len(timestamps)
    out = np.zeros(n)
    if n == 0:
        return MaskChannel("events", out, "magnitude")
    step = timestamps[1] - timestamps[0] if n > 1 else timedelta(hours=1)
    for ev in events:
        if _coord_distance(ev.location, location, haversine=False) > max_dist:
            continue
        for t, ts in enumerate(timestamps):
            if ev.start <= ts <= ev.end:
                out[t] = max(out[t], float(ev.magnitude))
            elif ramp_steps:
                before = ev.start - ts
                after = ts - ev.end
                if timedelta(0) < before <= ramp_steps * step:
                    out[t] = max(out[t], 1.0)
                elif timedelta(0) < after <= ramp_steps * step:
                    out[t] = max(out[t], 1.0)
    return MaskChannel("events", out, "magnitude")


def weather_channels(
    weather: Mapping[str, tuple[tuple[float, float], TimeSeries]],
    target_location: tuple[float, float],
    k: int,
    variables: Sequence[str],
    target_start: datetime,
    target_resolution: timedelta,
    target_length: int,
) -> list[MaskChannel]:
    """Weather variables from the k nearest meteorological stations.

    k = 1 selects the closest station verbatim; k > 1 averages with inverse
    distance weights. Values are aligned to the target grid by repeating the
    latest observation at or before each target timestamp.
    """
    if not weather:
        raise NoStations("no meteorological stations supplied")
    if k < 1 or k > len(weather):
        raise NoStations(f"k={k} outside [1, {len(weather)}]")
    by_dist = sorted(
        weather.items(),
        key=lambda kv: (_coord_distance(kv[1][0], target_location, False), kv[0]),
    )[:k]
    weights = []
    for sid, (loc, _) in by_dist:
        d = _coord_distance(loc, target_location, False)
        weights.append(1.0 / d if d > 0 else float("inf"))
    weights = np.asarray(weights)
    if np.isinf(weights).any():
        weights = np.where(np.isinf(weights), 1.0, 0.0)
    weights = weights / weights.sum()

    targets = [target_start + t * target_resolution for t in range(target_length)]
    out: list[MaskChannel] = []
    for var in variables:
        acc = np.zeros(target_length)
        for w, (sid, (_, ts)) in zip(weights, by_dist):
            if var not in ts.channels:
                raise MissingVariable(f"station {sid} has no channel {var!r}")
            vals = ts.channel(var)
            aligned = np.empty(target_length)
            for i, when in enumerate(targets):
                offset = int((when - ts.start) / ts.resolution)
                offset = min(max(offset, 0), ts.length - 1)
                aligned[i] = vals[offset]
            acc += w * aligned
        out.append(MaskChannel(var, acc, "continuous"))
    return out


def centroid(stations: Sequence[Station]) -> tuple[float, float]:
    """Arithmetic mean of station coordinates."""
    if not stations:
        raise EmptyTargetSet("cannot take centroid of no stations")
    return (
        sum(s.latitude for s in stations) / len(stations),
        sum(s.longitude for s in stations) / len(stations),
    )


def create_nearby_mask(spec: NearbyMaskSpec) -> TimeSeries:
    """Append occupation-ratio channels of stations near the target centroid.

    Target stations are excluded from their own neighborhood; candidates are
    kept when their coordinate distance to the centroid is below the radius.
    Channels are appended in ascending station-id order.
    """
    if not spec.target_ids:
        raise EmptyTargetSet("no target stations")
    by_id = {s.id: s for s in spec.stations}
    missing = [i for i in spec.target_ids if i not in by_id]
    if missing:
        raise EmptyTargetSet(f"target stations {missing} not in station list")
    center = centroid([by_id[i] for i in spec.target_ids])
    nearby = [
        s
        for s in spec.stations
        if s.id not in spec.target_ids
        and _coord_distance((s.latitude, s.longitude), center, spec.use_haversine)
        < spec.radius
    ]
    nearby.sort(key=lambda s: s.id)
    if not nearby:
        return spec.series

    result = spec.series
    stamps = spec.series.timestamps()
    for station in nearby:
        load = spec.loads[station.id]
        if load.resolution != spec.series.resolution:
            load = resample(load, spec.series.resolution, "repeat-upsample")
        ratios = np.empty(spec.series.length)
        for t, when in enumerate(stamps):
            offset = int((when - load.start) / load.resolution)
            offset = min(max(offset, 0), load.length - 1)
            ratios[t] = load.values[offset, 0] / station.capacity_at(when)
        channel = TimeSeries(
            spec.series.start,
            spec.series.resolution,
            (f"nearby_{station.id}",),
            ratios.reshape(-1, 1),
        )
        result = join_channels(result, channel)
    return result


def one_hot(mask: MaskChannel, n_codes: int | None = None) -> list[MaskChannel]:
    """Expand a categorical-code mask into binary indicator channels."""
    if mask.kind != "categorical-code":
        raise ValueError("one_hot applies to categorical-code masks only")
    codes = mask.values.astype(int)
    top = n_codes if n_codes is not None else int(codes.max()) + 1
    return [
        MaskChannel(f"{mask.name}_{c}", (codes == c).astype(float), "binary")
        for c in range(top)
    ]


def attach_masks(ts: TimeSeries, masks: Sequence[MaskChannel]) -> TimeSeries:
    """Append mask channels to a series as new columns."""
    extra = [
        TimeSeries(ts.start, ts.resolution, (m.name,), m.values.reshape(-1, 1))
        for m in masks
    ]
    return join_channels(ts, *extra)
