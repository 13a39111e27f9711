from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bikecast.errors import (
    AlignmentError,
    ChannelMismatch,
    DuplicateChannel,
    EmptyRange,
    EmptySubset,
    LoadExceedsCapacity,
    NonCommensurableResolution,
)
from bikecast.series import (
    ScalerParams,
    Station,
    TimeSeries,
    aggregate_stations,
    fit_minmax,
    infer_flows,
    join_channels,
    resample,
    scale,
    scale_array,
)

from conftest import HALF_HOUR, HOUR, T0, make_series, make_station


class TestTimeSeries:
    def test_basic_properties(self):
        ts = make_series([[1.0, 2.0], [3.0, 4.0]])
        assert ts.length == 2
        assert ts.width == 2
        assert ts.end == T0 + 2 * HOUR
        assert ts.timestamps() == [T0, T0 + HOUR]

    def test_values_read_only(self):
        ts = make_series([1.0, 2.0])
        with pytest.raises(ValueError):
            ts.values[0, 0] = 9.0

    def test_naive_start_coerced_to_utc(self):
        ts = make_series([1.0], start=datetime(2019, 3, 4))
        assert ts.start.tzinfo == timezone.utc

    def test_duplicate_channels_rejected(self):
        with pytest.raises(DuplicateChannel):
            make_series([[1.0, 2.0]], channels=("a", "a"))

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            make_series(np.empty((0, 1)))

    def test_channel_lookup(self):
        ts = make_series([[1.0, 2.0]], channels=("a", "b"))
        assert ts.channel("b") == pytest.approx([2.0])
        with pytest.raises(ChannelMismatch):
            ts.channel("missing")

    def test_slice(self):
        ts = make_series([1.0, 2.0, 3.0, 4.0])
        sub = ts.slice(1, 3)
        assert sub.start == T0 + HOUR
        assert sub.values[:, 0] == pytest.approx([2.0, 3.0])
        with pytest.raises(EmptyRange):
            ts.slice(2, 2)


class TestResample:
    def test_repeat_upsample(self):
        ts = make_series([10.0, 12.0], resolution=HOUR)
        out = resample(ts, HALF_HOUR, "repeat-upsample")
        assert out.values[:, 0] == pytest.approx([10, 10, 12, 12])
        assert out.resolution == HALF_HOUR

    def test_bin_sum(self):
        ts = make_series([3.0, 5.0], resolution=HALF_HOUR)
        out = resample(ts, HOUR, "sum")
        assert out.values[:, 0] == pytest.approx([8.0])

    def test_bin_mean(self):
        ts = make_series([3.0, 5.0, 7.0, 9.0], resolution=HALF_HOUR)
        out = resample(ts, HOUR, "mean")
        assert out.values[:, 0] == pytest.approx([4.0, 8.0])

    def test_identity(self):
        ts = make_series([1.0, 2.0])
        assert resample(ts, HOUR, "sum") is ts

    def test_non_commensurable(self):
        ts = make_series([1.0, 2.0], resolution=HOUR)
        with pytest.raises(NonCommensurableResolution):
            resample(ts, timedelta(minutes=45), "sum")


class TestJoinChannels:
    def test_concatenation(self):
        a = make_series([1.0, 2.0], channels=("a",))
        b = make_series([3.0, 4.0], channels=("b",))
        joined = join_channels(a, b)
        assert joined.channels == ("a", "b")
        assert joined.values == pytest.approx(np.array([[1.0, 3.0], [2.0, 4.0]]))

    def test_single_input_identity(self):
        a = make_series([1.0], channels=("a",))
        out = join_channels(a)
        assert out.channels == a.channels
        assert out.values == pytest.approx(a.values)

    def test_length_mismatch(self):
        a = make_series(np.ones(10), channels=("a",))
        b = make_series(np.ones(9), channels=("b",))
        with pytest.raises(AlignmentError):
            join_channels(a, b)

    def test_name_clash(self):
        a = make_series([1.0], channels=("a",))
        with pytest.raises(DuplicateChannel):
            join_channels(a, make_series([2.0], channels=("a",)))


class TestScaling:
    def test_fit_extrema(self):
        ts = make_series([2.0, 4.0, 6.0])
        p = fit_minmax(ts, (0, 3))
        assert p.mins == pytest.approx([2.0])
        assert p.maxs == pytest.approx([6.0])

    def test_fit_range_restriction(self):
        ts = make_series([1.0, 2.0, 9.0])
        p = fit_minmax(ts, (0, 2))
        assert p.maxs == pytest.approx([2.0])

    def test_fit_empty_range(self):
        ts = make_series([1.0, 2.0])
        with pytest.raises(EmptyRange):
            fit_minmax(ts, (1, 1))

    def test_forward_values(self):
        ts = make_series([0.0, 5.0, 10.0])
        p = fit_minmax(ts, (0, 3))
        out = scale(ts, p)
        assert out.values[:, 0] == pytest.approx([0.0, 0.5, 1.0])

    def test_no_clipping(self):
        p = ScalerParams(np.array([0.0]), np.array([10.0]))
        out = scale_array(np.array([20.0, -10.0]), p)
        assert out == pytest.approx([2.0, -1.0])

    def test_constant_channel(self):
        p = ScalerParams(np.array([5.0]), np.array([5.0]))
        forward = scale_array(np.array([5.0, 7.0]), p)
        assert forward == pytest.approx([0.0, 0.0])
        inverse = scale_array(forward, p, "inverse")
        assert inverse == pytest.approx([5.0, 5.0])

    def test_channel_mismatch(self):
        p = ScalerParams(np.zeros(2), np.ones(2))
        with pytest.raises(ChannelMismatch):
            scale(make_series([1.0]), p)

    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=2,
            max_size=30,
        )
    )
    def test_round_trip(self, values):
        ts = make_series(values)
        p = fit_minmax(ts, (0, ts.length))
        back = scale(scale(ts, p, "forward"), p, "inverse")
        span = max(1.0, float(np.abs(ts.values).max()))
        assert np.abs(back.values - ts.values).max() <= 1e-12 * span

    def test_params_from_training_range_only(self):
        values = np.arange(10.0)
        ts = make_series(values)
        p1 = fit_minmax(ts, (0, 6))
        perturbed = values.copy()
        perturbed[6:] += 1000.0
        p2 = fit_minmax(make_series(perturbed), (0, 6))
        assert p1.mins == pytest.approx(p2.mins)
        assert p1.maxs == pytest.approx(p2.maxs)


class TestStation:
    def test_capacity_history(self):
        st_ = Station("a", 0.0, 0.0, ((T0, 10), (T0 + 2 * HOUR, 14)))
        assert st_.capacity_at(T0 + HOUR) == 10
        assert st_.capacity_at(T0 + 2 * HOUR) == 14
        assert st_.capacity_at(T0 - HOUR) == 10  # before first record

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            Station("a", 0.0, 0.0, ((T0, 0),))
        with pytest.raises(ValueError):
            Station("a", 0.0, 0.0, ((T0, 5), (T0, 6)))


class TestAggregate:
    def test_sum_over_subset(self):
        per = {
            "a": make_series([1.0, 2.0], channels=("load",)),
            "b": make_series([3.0, 4.0], channels=("load",)),
        }
        out = aggregate_stations(per, ["b", "a"])
        assert out.values[:, 0] == pytest.approx([4.0, 6.0])

    def test_empty_subset(self):
        with pytest.raises(EmptySubset):
            aggregate_stations({}, [])

    def test_unknown_station(self):
        per = {"a": make_series([1.0])}
        with pytest.raises(EmptySubset):
            aggregate_stations(per, ["a", "zz"])

    def test_misaligned(self):
        per = {
            "a": make_series([1.0, 2.0]),
            "b": make_series([1.0, 2.0], start=T0 + HOUR),
        }
        with pytest.raises(AlignmentError):
            aggregate_stations(per, ["a", "b"])


class TestInferFlows:
    def test_decomposition(self):
        station = make_station(capacity=10)
        load = make_series([5.0, 7.0, 4.0, 4.0], channels=("load",))
        ci, co = infer_flows(load, station)
        assert ci.values[:, 0] == pytest.approx([0, 2, 0, 0])
        assert co.values[:, 0] == pytest.approx([0, 0, 3, 0])

    def test_capacity_change_step_contributes_zero(self):
        station = Station("s", 0.0, 0.0, ((T0, 10), (T0 + 2 * HOUR, 20)))
        load = make_series([5.0, 5.0, 15.0, 16.0], channels=("load",))
        ci, co = infer_flows(load, station)
        assert ci.values[2, 0] == 0.0  # the capacity jump step
        assert co.values[2, 0] == 0.0
        assert ci.values[3, 0] == 1.0

    def test_load_exceeds_capacity(self):
        station = make_station(capacity=4)
        with pytest.raises(LoadExceedsCapacity):
            infer_flows(make_series([5.0], channels=("load",)), station)

    def test_ledger_identity(self):
        rng = np.random.default_rng(3)
        station = make_station(capacity=30)
        load = make_series(rng.integers(0, 31, size=50).astype(float))
        ci, co = infer_flows(load, station)
        diff = np.diff(load.values[:, 0])
        net = ci.values[1:, 0] - co.values[1:, 0]
        assert net == pytest.approx(diff)
