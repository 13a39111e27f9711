"""CSV ingestion and persistence for the station / weather / event / calendar
schemas, plus a generic delimited format for intermediate series artifacts."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError
from .masks import EventRecord
from .series import Station, TimeSeries


def parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _read_rows(path: Path, expected: list[str]) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise ConfigError(
                f"{path}: expected header {','.join(expected)}, got {reader.fieldnames}"
            )
        return list(reader)


@dataclass
class CalendarData:
    """Per-date calendar flags."""

    holidays: set[date] = field(default_factory=set)
    academic_breaks: set[date] = field(default_factory=set)
    festivities: set[date] = field(default_factory=set)

    @staticmethod
    def intervals(dates: set[date]) -> list[tuple[date, date]]:
        """Collapse a date set into maximal contiguous inclusive intervals."""
        if not dates:
            return []
        ordered = sorted(dates)
        out = []
        lo = prev = ordered[0]
        for d in ordered[1:]:
            if (d - prev).days > 1:
                out.append((lo, prev))
                lo = d
            prev = d
        out.append((lo, prev))
        return out


WEATHER_VARIABLES = (
    "temperature_c",
    "humidity_pct",
    "wind_kmh",
    "pressure_hpa",
    "precipitation_mm",
)


def read_stations(path: Path) -> list[Station]:
    """stations.csv: station_id,latitude,longitude,capacity"""
    rows = _read_rows(path, ["station_id", "latitude", "longitude", "capacity"])
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    return [
        Station(
            id=r["station_id"],
            latitude=float(r["latitude"]),
            longitude=float(r["longitude"]),
            capacity=((epoch, int(r["capacity"])),),
        )
        for r in rows
    ]


def read_station_status(
    path: Path, stations: list[Station], resolution: timedelta
) -> tuple[list[Station], dict[str, TimeSeries]]:
    """station_status.csv: timestamp,station_id,num_bikes,capacity

    Builds a regular per-station load grid (forward-filled between status
    rows) and a capacity history from observed capacity changes.
    """
    rows = _read_rows(path, ["timestamp", "station_id", "num_bikes", "capacity"])
    per_station: dict[str, list[tuple[datetime, int, int]]] = {}
    for r in rows:
        per_station.setdefault(r["station_id"], []).append(
            (parse_timestamp(r["timestamp"]), int(r["num_bikes"]), int(r["capacity"]))
        )
    if not per_station:
        raise ConfigError(f"{path}: no status rows")
    all_times = [t for recs in per_station.values() for t, _, _ in recs]
    start = min(all_times)
    start = start - timedelta(
        microseconds=(start - datetime(1970, 1, 1, tzinfo=timezone.utc))
        % resolution
        // timedelta(microseconds=1)
    )
    end = max(all_times)
    steps = int((end - start) / resolution) + 1

    out_stations = []
    loads: dict[str, TimeSeries] = {}
    for st in stations:
        recs = sorted(per_station.get(st.id, []))
        if not recs:
            raise ConfigError(f"station {st.id} has no status rows")
        caps: list[tuple[datetime, int]] = [(st.capacity[0][0], recs[0][2])]
        for when, _, cap in recs:
            if cap != caps[-1][1]:
                caps.append((when, cap))
        grid = np.empty(steps)
        cursor = 0
        current = float(recs[0][1])
        for t in range(steps):
            when = start + t * resolution
            while cursor < len(recs) and recs[cursor][0] <= when:
                current = float(recs[cursor][1])
                cursor += 1
            grid[t] = current
        out_stations.append(
            Station(st.id, st.latitude, st.longitude, tuple(caps))
        )
        loads[st.id] = TimeSeries(start, resolution, ("load",), grid.reshape(-1, 1))
    return out_stations, loads


def read_weather(path: Path) -> dict[str, tuple[tuple[float, float], TimeSeries]]:
    """weather.csv keyed by weather_station_id; one regular series per station."""
    expected = ["timestamp", "weather_station_id", "latitude", "longitude", *WEATHER_VARIABLES]
    rows = _read_rows(path, expected)
    grouped: dict[str, list[dict[str, str]]] = {}
    for r in rows:
        grouped.setdefault(r["weather_station_id"], []).append(r)
    out = {}
    for sid, recs in grouped.items():
        recs.sort(key=lambda r: r["timestamp"])
        stamps = [parse_timestamp(r["timestamp"]) for r in recs]
        if len(stamps) > 1:
            resolution = stamps[1] - stamps[0]
        else:
            resolution = timedelta(hours=1)
        values = np.array(
            [[float(r[v]) for v in WEATHER_VARIABLES] for r in recs]
        )
        loc = (float(recs[0]["latitude"]), float(recs[0]["longitude"]))
        out[sid] = (loc, TimeSeries(stamps[0], resolution, WEATHER_VARIABLES, values))
    return out


def read_events(path: Path) -> list[EventRecord]:
    """events.csv: start,end,latitude,longitude,magnitude,label"""
    rows = _read_rows(path, ["start", "end", "latitude", "longitude", "magnitude", "label"])
    return [
        EventRecord(
            start=parse_timestamp(r["start"]),
            end=parse_timestamp(r["end"]),
            location=(float(r["latitude"]), float(r["longitude"])),
            magnitude=int(r["magnitude"]),
            label=r["label"],
        )
        for r in rows
    ]


def read_calendar(path: Path) -> CalendarData:
    """calendar.csv: date,is_holiday,is_academic_break,is_festivity"""
    rows = _read_rows(path, ["date", "is_holiday", "is_academic_break", "is_festivity"])
    cal = CalendarData()
    for r in rows:
        d = date.fromisoformat(r["date"])
        if r["is_holiday"] == "1":
            cal.holidays.add(d)
        if r["is_academic_break"] == "1":
            cal.academic_breaks.add(d)
        if r["is_festivity"] == "1":
            cal.festivities.add(d)
    return cal


# -- writers (used by the generator and pipeline stages) ----------------

def write_stations(path: Path, stations: Iterable[Station]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["station_id", "latitude", "longitude", "capacity"])
        for s in stations:
            w.writerow([s.id, f"{s.latitude:.6f}", f"{s.longitude:.6f}", s.capacity[0][1]])


def write_station_status(path: Path, loads: Mapping[str, TimeSeries], stations: Mapping[str, Station]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "station_id", "num_bikes", "capacity"])
        for sid in sorted(loads):
            ts = loads[sid]
            for when, row in zip(ts.timestamps(), ts.values):
                w.writerow(
                    [
                        format_timestamp(when),
                        sid,
                        int(row[0]),
                        stations[sid].capacity_at(when),
                    ]
                )


def write_weather(path: Path, weather: Mapping[str, tuple[tuple[float, float], TimeSeries]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "weather_station_id", "latitude", "longitude", *WEATHER_VARIABLES])
        for sid in sorted(weather):
            (lat, lon), ts = weather[sid]
            for when, row in zip(ts.timestamps(), ts.values):
                w.writerow(
                    [format_timestamp(when), sid, f"{lat:.6f}", f"{lon:.6f}"]
                    + [f"{v:.6f}" for v in row]
                )


def write_events(path: Path, events: Iterable[EventRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["start", "end", "latitude", "longitude", "magnitude", "label"])
        for ev in events:
            w.writerow(
                [
                    format_timestamp(ev.start),
                    format_timestamp(ev.end),
                    f"{ev.location[0]:.6f}",
                    f"{ev.location[1]:.6f}",
                    ev.magnitude,
                    ev.label,
                ]
            )


def write_calendar(path: Path, cal: CalendarData, first: date, last: date) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "is_holiday", "is_academic_break", "is_festivity"])
        d = first
        while d <= last:
            w.writerow(
                [
                    d.isoformat(),
                    int(d in cal.holidays),
                    int(d in cal.academic_breaks),
                    int(d in cal.festivities),
                ]
            )
            d += timedelta(days=1)


def write_series(path: Path, ts: TimeSeries) -> None:
    """Persist a series as timestamp + one column per channel."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", *ts.channels])
        for when, row in zip(ts.timestamps(), ts.values):
            w.writerow([format_timestamp(when)] + [repr(float(v)) for v in row])


def read_series(path: Path) -> TimeSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "timestamp":
            raise ConfigError(f"{path}: not a series CSV")
        channels = tuple(header[1:])
        stamps: list[datetime] = []
        values: list[list[float]] = []
        for row in reader:
            stamps.append(parse_timestamp(row[0]))
            values.append([float(v) for v in row[1:]])
    if len(stamps) < 1:
        raise ConfigError(f"{path}: empty series")
    resolution = stamps[1] - stamps[0] if len(stamps) > 1 else timedelta(hours=1)
    return TimeSeries(stamps[0], resolution, channels, np.array(values))
