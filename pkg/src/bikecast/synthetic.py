"""Seeded synthetic bike-sharing scenarios: station network, weather,
events, calendar and a trip simulation with capacity-induced spillover.

Generated CSV artifacts use exactly the ingestion schemas, so synthetic
scenarios are indistinguishable from real feeds downstream."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import ingest
from .errors import BadRange
from .masks import EventRecord
from .series import Station, TimeSeries


def _default_profile(steps_per_day: int, daily_total: float) -> np.ndarray:
    """Two-peak weekday-style demand profile summing to ``daily_total``."""
    hours = np.arange(steps_per_day) * 24.0 / steps_per_day
    shape = (
        0.08
        + np.exp(-((hours - 8.5) ** 2) / 3.0)
        + 1.1 * np.exp(-((hours - 18.0) ** 2) / 4.5)
    )
    return shape / shape.sum() * daily_total


@dataclass
class ScenarioConfig:
    n_stations: int = 6
    days: int = 30
    resolution_minutes: int = 30
    start: datetime = datetime(2019, 3, 4, tzinfo=timezone.utc)  # a Monday
    daily_checkouts_per_station: float = 180.0
    base_profile: Optional[tuple[float, ...]] = None  # per-step rate, else default shape
    weekday_multipliers: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0, 0.7, 0.6)
    holiday_multiplier: float = 0.6
    weather_weights: dict = field(default_factory=dict)  # channel -> weight
    events_per_week: float = 1.0
    event_weight: float = 0.0
    spillover_radius: float = 0.02
    noise_level: float = 0.1
    seed: int = 0
    bounding_box: tuple[float, float, float, float] = (38.70, -9.20, 38.78, -9.09)
    capacity_range: tuple[int, int] = (24, 48)
    n_weather_stations: int = 2
    weather_persistence_hours: float = 18.0
    # per-variable persistence (hours) overriding weather_persistence_hours
    weather_persistence_overrides: dict = field(default_factory=dict)
    # riders react to conditions from this many hours back (wet streets,
    # decisions made on recent weather), not the instantaneous reading
    weather_effect_lag_hours: float = 0.0
    trip_steps: tuple[int, int] = (1, 4)
    initial_fill: float = 0.55

    def __post_init__(self):
        if self.days < 1:
            raise BadRange("days must be >= 1")
        if self.noise_level < 0:
            raise BadRange("noise level must be >= 0")
        if self.base_profile is not None and min(self.base_profile) < 0:
            raise BadRange("base profile rates must be >= 0")

    @property
    def resolution(self) -> timedelta:
        return timedelta(minutes=self.resolution_minutes)

    @property
    def steps_per_day(self) -> int:
        return int(timedelta(days=1) / self.resolution)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    stations: list[Station]
    loads: dict[str, TimeSeries]
    checkins: dict[str, TimeSeries]  # net flows, the load-inference convention
    checkouts: dict[str, TimeSeries]
    demand_out: dict[str, TimeSeries]  # true checkout demand incl. unmet
    demand_in: dict[str, TimeSeries]  # arrivals before any redirection
    weather: dict[str, tuple[tuple[float, float], TimeSeries]]
    events: list[EventRecord]
    calendar: ingest.CalendarData
    unmet_checkouts: dict[str, int]
    redirected_checkins: int
    in_transit_end: int


def generate_network(
    n: int,
    bounding_box: tuple[float, float, float, float],
    capacity_range: tuple[int, int],
    seed: int = 0,
) -> list[Station]:
    """Uniformly placed stations with uniform capacities, deterministic per seed."""
    if n < 1:
        raise BadRange("need at least one station")
    lat_lo, lon_lo, lat_hi, lon_hi = bounding_box
    cap_lo, cap_hi = capacity_range
    if cap_lo < 1 or cap_hi < cap_lo:
        raise BadRange(f"bad capacity range {capacity_range}")
    if lat_hi <= lat_lo or lon_hi <= lon_lo:
        raise BadRange(f"bad bounding box {bounding_box}")
    rng = np.random.default_rng(seed)
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    stations = []
    for i in range(n):
        lat = float(rng.uniform(lat_lo, lat_hi))
        lon = float(rng.uniform(lon_lo, lon_hi))
        cap = int(rng.integers(cap_lo, cap_hi + 1))
        stations.append(Station(f"s{i:03d}", lat, lon, ((epoch, cap),)))
    return stations


def _ar1(rng, steps: int, phi: float, sigma: float) -> np.ndarray:
    """Stationary AR(1) with stationary standard deviation ``sigma``.

    Innovations are scaled by sqrt(1 - phi^2) so that persistence controls
    memory only; the marginal amplitude stays fixed."""
    innovation = sigma * math.sqrt(max(1 - phi ** 2, 1e-12))
    out = np.empty(steps)
    x = rng.normal(0, sigma)
    for t in range(steps):
        x = phi * x + rng.normal(0, innovation)
        out[t] = x
    return out


def generate_weather(
    config: ScenarioConfig, rng: np.random.Generator
) -> dict[str, tuple[tuple[float, float], TimeSeries]]:
    """Hourly weather for a few stations: shared regional processes plus
    small per-station jitter."""
    hours = config.days * 24

    def phi(variable: str) -> float:
        hrs = config.weather_persistence_overrides.get(
            variable, config.weather_persistence_hours
        )
        return math.exp(-1.0 / hrs)

    hour_of_day = np.arange(hours) % 24

    regional_temp = 14 + 5 * np.sin((hour_of_day - 9) / 24 * 2 * np.pi) + _ar1(rng, hours, phi("temperature_c"), 0.8)
    regional_humidity = np.clip(70 + _ar1(rng, hours, phi("humidity_pct"), 4.0), 20, 100)
    regional_wind = np.clip(12 + _ar1(rng, hours, phi("wind_kmh"), 4.0), 0, None)
    regional_pressure = 1013 + _ar1(rng, hours, 0.99, 0.3)
    rain_driver = _ar1(rng, hours, phi("precipitation_mm"), 1.0)
    regional_precip = np.clip(rain_driver - 0.8, 0, None) * 2.5

    lat_lo, lon_lo, lat_hi, lon_hi = config.bounding_box
    out = {}
    start = config.start
    for i in range(config.n_weather_stations):
        lat = float(rng.uniform(lat_lo, lat_hi))
        lon = float(rng.uniform(lon_lo, lon_hi))
        values = np.column_stack(
            [
                regional_temp + rng.normal(0, 0.2, hours),
                regional_humidity + rng.normal(0, 0.5, hours),
                np.clip(regional_wind + rng.normal(0, 0.3, hours), 0, None),
                regional_pressure + rng.normal(0, 0.05, hours),
                np.clip(regional_precip + rng.normal(0, 0.02, hours), 0, None),
            ]
        )
        out[f"w{i}"] = (
            (lat, lon),
            TimeSeries(start, timedelta(hours=1), ingest.WEATHER_VARIABLES, values),
        )
    return out


#: Per-variable normalization applied before the exponential demand effect.
WEATHER_NORMALIZERS = {
    "temperature_c": lambda v: (v - 14.0) / 10.0,
    "humidity_pct": lambda v: (v - 70.0) / 30.0,
    "wind_kmh": lambda v: v / 15.0,
    "pressure_hpa": lambda v: (v - 1013.0) / 10.0,
    "precipitation_mm": lambda v: v / 2.0,
}


def generate_events(
    config: ScenarioConfig, stations: list[Station], rng: np.random.Generator
) -> list[EventRecord]:
    n_events = int(round(config.events_per_week * config.days / 7.0))
    events = []
    for i in range(n_events):
        anchor = stations[int(rng.integers(len(stations)))]
        day = int(rng.integers(config.days))
        hour = int(rng.integers(14, 21))
        start = config.start + timedelta(days=day, hours=hour)
        duration = timedelta(hours=int(rng.integers(2, 6)))
        events.append(
            EventRecord(
                start=start,
                end=start + duration,
                location=(
                    anchor.latitude + float(rng.normal(0, 0.002)),
                    anchor.longitude + float(rng.normal(0, 0.002)),
                ),
                magnitude=int(rng.integers(1, 6)),
                label=f"event_{i}",
            )
        )
    return sorted(events, key=lambda e: e.start)


def generate_calendar(config: ScenarioConfig, rng: np.random.Generator) -> ingest.CalendarData:
    cal = ingest.CalendarData()
    first = config.start.date()
    for month_start in range(0, config.days, 28):
        offset = int(rng.integers(0, min(28, config.days - month_start)))
        cal.holidays.add(first + timedelta(days=month_start + offset))
    if config.days >= 21:
        break_start = int(rng.integers(0, config.days - 7))
        for d in range(7):
            cal.academic_breaks.add(first + timedelta(days=break_start + d))
    return cal


def _nearest_nonfull(
    origin_idx: int,
    loads: np.ndarray,
    caps: np.ndarray,
    coords: np.ndarray,
    radius: Optional[float],
) -> Optional[int]:
    candidates = []
    for j in range(loads.shape[0]):
        if loads[j] >= caps[j]:
            continue
        d = math.hypot(
            coords[j, 0] - coords[origin_idx, 0], coords[j, 1] - coords[origin_idx, 1]
        )
        if radius is not None and d > radius and j != origin_idx:
            continue
        candidates.append((d, j))
    if not candidates:
        return None
    return min(candidates)[1]


def generate_scenario(
    network: list[Station], config: ScenarioConfig
) -> ScenarioResult:
    """Simulate demand, trips and dockings over the scenario horizon.

    Reported check-in/check-out series follow the load-difference convention
    (at most one direction per station and step), so flow inference from the
    load series reproduces them exactly. Gross demand series are kept
    alongside for analysis.
    """
    rng = np.random.default_rng(config.seed)
    spd = config.steps_per_day
    steps = config.days * spd
    n = len(network)
    coords = np.array([[s.latitude, s.longitude] for s in network])
    caps0 = np.array([s.capacity_at(config.start) for s in network], dtype=int)

    weather = generate_weather(config, rng)
    events = generate_events(config, network, rng)
    calendar = generate_calendar(config, rng)

    if config.base_profile is not None:
        base = np.asarray(config.base_profile, dtype=np.float64)
        if base.shape[0] != spd:
            raise BadRange(f"base profile must have {spd} entries")
    else:
        base = _default_profile(spd, config.daily_checkouts_per_station)

    # weather effect factor per demand step (regional = mean over stations)
    effect = np.zeros(steps)
    upsample = int(timedelta(hours=1) / config.resolution)
    for var, weight in config.weather_weights.items():
        if weight == 0.0:
            continue
        norm = WEATHER_NORMALIZERS[var]
        stacked = np.mean(
            [ts.channel(var) for _, ts in weather.values()], axis=0
        )
        per_step = np.repeat(norm(stacked), upsample)[:steps]
        lag = int(round(config.weather_effect_lag_hours * upsample))
        if lag > 0:
            per_step = np.concatenate([np.full(lag, per_step[0]), per_step[:-lag]])
        effect += weight * per_step
    weather_factor = np.exp(-effect)

    # event boost per station and step
    event_boost = np.zeros((n, steps))
    if config.event_weight != 0.0 and events:
        for ev in events:
            lo = max(0, int((ev.start - config.start) / config.resolution))
            hi = min(steps, int((ev.end - config.start) / config.resolution) + 1)
            for s_idx in range(n):
                d = math.hypot(
                    coords[s_idx, 0] - ev.location[0], coords[s_idx, 1] - ev.location[1]
                )
                if d <= config.spillover_radius:
                    event_boost[s_idx, lo:hi] += config.event_weight * ev.magnitude

    station_scale = caps0 / caps0.mean()
    weekday = np.array(
        [(config.start + timedelta(minutes=config.resolution_minutes * t)).weekday() for t in range(steps)]
    )
    dates = [
        (config.start + t * config.resolution).date() for t in range(steps)
    ]
    cal_mult = np.array(
        [
            config.holiday_multiplier
            if d in calendar.holidays
            else config.weekday_multipliers[w]
            for d, w in zip(dates, weekday)
        ]
    )

    loads = np.zeros((n, steps), dtype=int)
    net_in = np.zeros((n, steps), dtype=int)
    net_out = np.zeros((n, steps), dtype=int)
    demand_out = np.zeros((n, steps), dtype=int)
    demand_in = np.zeros((n, steps), dtype=int)
    unmet = dict.fromkeys(range(n), 0)
    redirected = 0

    current = np.array([int(c * config.initial_fill) for c in caps0])
    arrivals: list[tuple[int, int, int]] = []  # (due step, tiebreak, destination)
    counter = 0

    for t in range(steps):
        prev = current.copy()
        step_of_day = t % spd
        # checkout demand per station
        for s_idx in range(n):
            rate = (
                base[step_of_day]
                * cal_mult[t]
                * weather_factor[t]
                * station_scale[s_idx]
                + event_boost[s_idx, t]
            )
            if config.noise_level > 0:
                rate *= math.exp(
                    rng.normal(0, config.noise_level) - config.noise_level ** 2 / 2
                )
                attempts = int(rng.poisson(rate))
            else:
                attempts = int(round(rate))
            demand_out[s_idx, t] = attempts
            realized = min(attempts, int(current[s_idx]))
            unmet[s_idx] += attempts - realized
            current[s_idx] -= realized
            for _ in range(realized):
                dest = int(rng.integers(n))
                delay = int(rng.integers(config.trip_steps[0], config.trip_steps[1] + 1))
                heapq.heappush(arrivals, (t + delay, counter, dest))
                counter += 1
        # dockings due this step
        while arrivals and arrivals[0][0] <= t:
            _, tick, dest = heapq.heappop(arrivals)
            demand_in[dest, t] += 1
            target = dest
            if current[dest] >= caps0[dest]:
                near = _nearest_nonfull(dest, current, caps0, coords, config.spillover_radius)
                if near is None:
                    near = _nearest_nonfull(dest, current, caps0, coords, None)
                if near is None:
                    heapq.heappush(arrivals, (t + 1, tick, dest))
                    continue
                target = near
                redirected += 1
            current[target] += 1
        loads[:, t] = current
        if t > 0:  # flows at the first observation are zero by convention
            d = current - prev
            net_in[:, t] = np.maximum(d, 0)
            net_out[:, t] = np.maximum(-d, 0)

    def per_station(name: str, matrix: np.ndarray) -> dict[str, TimeSeries]:
        return {
            st.id: TimeSeries(
                config.start,
                config.resolution,
                (name,),
                matrix[i].astype(float).reshape(-1, 1),
            )
            for i, st in enumerate(network)
        }

    return ScenarioResult(
        config=config,
        stations=list(network),
        loads=per_station("load", loads),
        checkins=per_station("checkins", net_in),
        checkouts=per_station("checkouts", net_out),
        demand_out=per_station("checkout_demand", demand_out),
        demand_in=per_station("checkin_demand", demand_in),
        weather=weather,
        events=events,
        calendar=calendar,
        unmet_checkouts={network[i].id: v for i, v in unmet.items()},
        redirected_checkins=redirected,
        in_transit_end=len(arrivals),
    )


def write_scenario(result: ScenarioResult, out_dir: Path | str) -> dict[str, Path]:
    """Persist a scenario using the ingestion CSV schemas."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stations_by_id = {s.id: s for s in result.stations}
    paths = {
        "stations": out / "stations.csv",
        "station_status": out / "station_status.csv",
        "weather": out / "weather.csv",
        "events": out / "events.csv",
        "calendar": out / "calendar.csv",
    }
    ingest.write_stations(paths["stations"], result.stations)
    ingest.write_station_status(paths["station_status"], result.loads, stations_by_id)
    ingest.write_weather(paths["weather"], result.weather)
    ingest.write_events(paths["events"], result.events)
    first = result.config.start.date()
    last = first + timedelta(days=result.config.days - 1)
    ingest.write_calendar(paths["calendar"], result.calendar, first, last)
    return paths
