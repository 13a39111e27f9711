from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from bikecast.series import Station, TimeSeries

T0 = datetime(2019, 3, 4, tzinfo=timezone.utc)  # a Monday
HALF_HOUR = timedelta(minutes=30)
HOUR = timedelta(hours=1)


def make_series(values, start=T0, resolution=HOUR, channels=None):
    """Build a TimeSeries from a 1-d or 2-d array with default channel names."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if channels is None:
        channels = tuple(f"c{i}" for i in range(arr.shape[1]))
    return TimeSeries(start, resolution, tuple(channels), arr)


def make_station(sid="s1", lat=38.72, lon=-9.14, capacity=20, since=T0):
    return Station(sid, lat, lon, ((since, capacity),))


@pytest.fixture
def t0():
    return T0
