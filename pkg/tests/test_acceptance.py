"""Acceptance gate: end-to-end correctness and behavioural criteria.

Each test here checks one release criterion at its stated tolerance, using
independent oracles (plain-loop recursions, scipy references) where the
implementation could otherwise only be compared against itself.
"""

import time
from pathlib import Path

import numpy as np
import pytest
import scipy.stats

from bikecast.baselines import (
    dtw,
    dba_objective_trace,
    euclidean_barycenter,
    holt_winters_fit,
    holt_winters_forecast,
    knn_forecast,
)
from bikecast.evaluation import paired_t_test
from bikecast.recurrent import SequenceRegressor, gradient_check
from bikecast.recurrent.cells import init_cell
from bikecast.segmentation import (
    create_subdatasets,
    segment_instances,
    steps_per_day,
)
from bikecast.series import TimeSeries, fit_minmax, infer_flows, scale, scale_array
from bikecast.synthetic import ScenarioConfig, generate_network, generate_scenario
from bikecast.pipeline import cli

from conftest import T0, HOUR, make_series
from test_baselines import dtw_oracle, hw_oracle, hw_forecast_oracle, make_instances


class TestCriterion1GradientCorrectness:
    def test_twenty_randomized_models(self):
        # Finite differencing in float64 cannot certify a 1e-4 relative
        # error on parameters whose true gradient is itself ~1e-8, so the
        # draws below are kept well-conditioned: output weights are scaled
        # up, inputs widened, and (under L1) parameters nudged off the
        # |p| = 0 kink.
        start = time.time()
        rng = np.random.default_rng(5)
        losses = ["mse", "mae", "cosine"]
        for trial in range(20):
            kind = ("lstm", "gru")[trial % 2]
            hidden = int(rng.integers(2, 9))
            n_in = int(rng.integers(1, 4))
            seq_len = int(rng.integers(3, 5))
            horizon = int(rng.integers(2, 5))
            loss = losses[trial % 3]
            l1 = 0.0 if trial % 4 else 1e-3
            readout = ("final", "step")[trial % 2]
            cell = init_cell(kind, n_in, hidden, rng)
            reg = SequenceRegressor(
                cell, horizon if readout == "final" else 1, readout
            )
            for name, arr in reg.params.items():
                if l1 > 0:
                    arr += np.where(arr >= 0, 0.01, -0.01)
                if name.startswith("W_out"):
                    arr *= 3.0
            x = 1.5 * rng.normal(size=(2, seq_len, n_in))
            y = rng.normal(size=(2, seq_len if readout == "step" else horizon))
            err = gradient_check(reg, x, y, loss=loss, l1_weight=l1, eps=1e-4)
            assert err < 1e-4, f"trial {trial} ({kind}, {loss}): {err}"
        assert time.time() - start < 60.0


class TestCriterion2DtwOracle:
    def test_all_pairs_match_exhaustive_minimization(self):
        start = time.time()
        rng = np.random.default_rng(5)
        series = [rng.normal(size=int(rng.integers(1, 7))) for _ in range(50)]
        for i in range(len(series)):
            for j in range(i, len(series)):
                got = dtw(series[i], series[j])
                want = dtw_oracle(series[i], series[j])
                assert abs(got - want) <= 1e-12, (i, j, got, want)
        assert time.time() - start < 60.0


class TestCriterion3DbaMonotonicity:
    def test_objective_never_increases(self):
        start = time.time()
        rng = np.random.default_rng(11)
        for case in range(20):
            members = [rng.normal(size=8) for _ in range(10)]
            trace = dba_objective_trace(members, max_iters=8)
            diffs = np.diff(trace)
            assert (diffs <= 1e-9).all(), f"case {case}: trace {trace}"
        assert time.time() - start < 120.0


class TestCriterion4HoltWintersOracle:
    def test_hundred_random_parameterizations(self):
        rng = np.random.default_rng(17)
        for case in range(100):
            mode = ("additive", "multiplicative")[case % 2]
            period = int(rng.integers(2, 9))
            n = period * int(rng.integers(2, 6)) + int(rng.integers(0, period))
            x = rng.uniform(1.0, 10.0, size=n)
            alpha, beta, gamma = rng.uniform(0.05, 0.95, size=3)

            state = holt_winters_fit(x, period, alpha, beta, gamma, mode=mode)
            level, trend, seasonal = hw_oracle(x, period, alpha, beta, gamma, mode)

            assert state.level == pytest.approx(level, abs=1e-10)
            assert state.trend == pytest.approx(trend, abs=1e-10)
            assert state.seasonal == pytest.approx(seasonal[-period:], abs=1e-10)

            got = holt_winters_forecast(state, 24)
            want = hw_forecast_oracle(level, trend, seasonal, period, 24, mode)
            assert got == pytest.approx(want, abs=1e-10)


class TestCriterion5KnnBarycenterIdentity:
    def test_full_k_equals_euclidean_barycenter_exactly(self):
        for seed in range(5):
            train = make_instances(7, seed=seed)
            query = np.random.default_rng(seed).normal(size=train[0].input.values.shape)
            got = knn_forecast(train, query, len(train))
            want = euclidean_barycenter([i.output.values[:, 0] for i in train])
            assert np.array_equal(got, want)


class TestCriterion6SegmentationLaws:
    def test_randomized_count_sweep(self):
        rng = np.random.default_rng(23)
        cases = 0
        while cases < 1000:
            days = int(rng.integers(2, 15))
            spd = int(rng.choice([12, 24, 48]))
            series = make_series(
                np.arange(days * spd, dtype=float),
                resolution=HOUR * 24 / spd,
                channels=("checkouts",),
            )
            window = int(rng.integers(1, days + 1))
            step = int(rng.integers(1, 5))
            subs = create_subdatasets(series, window, step)
            assert len(subs) == (days - window) // step + 1

            h = int(rng.integers(1, spd + 1))
            input_len = int(rng.integers(2 * h, 3 * h + 1))
            slide = int(rng.integers(1, spd + 1))
            total = days * spd
            expected = (total - input_len - h) // slide + 1
            if expected < 1:
                cases += 1
                continue
            insts = segment_instances(
                series, h, "checkouts", input_len=input_len, slide=slide
            )
            assert len(insts) == expected
            cases += 1

    def test_figure_case_three_subdatasets(self):
        series = make_series(np.zeros(9 * 24), resolution=HOUR, channels=("x",))
        assert steps_per_day(series) == 24
        assert len(create_subdatasets(series, 7, 1)) == 3


class TestCriterion7ScalerHygiene:
    def test_round_trip_within_tolerance(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            values = rng.uniform(-50, 50, size=(40, 3))
            ts = make_series(values, channels=("a", "b", "c"))
            params = fit_minmax(ts, (0, 30))
            back = scale(scale(ts, params), params, "inverse")
            span = values.max() - values.min()
            assert np.abs(back.values - values).max() <= 1e-12 * max(span, 1.0)

    def test_params_from_training_range_only(self):
        rng = np.random.default_rng(37)
        values = rng.uniform(0, 10, size=(50, 2))
        ts = make_series(values, channels=("a", "b"))
        params = fit_minmax(ts, (0, 30))

        perturbed = values.copy()
        perturbed[30:] += rng.uniform(100, 200, size=perturbed[30:].shape)
        params2 = fit_minmax(make_series(perturbed, channels=("a", "b")), (0, 30))

        assert np.array_equal(params.mins, params2.mins)
        assert np.array_equal(params.maxs, params2.maxs)
        # and scaled training values agree under both fits
        assert np.array_equal(
            scale_array(values[:30], params), scale_array(perturbed[:30], params2)
        )


LIFT_MASK_CHANNELS = ("wind_kmh", "precipitation_mm")


@pytest.fixture(scope="module")
def context_lift_scenario():
    from bikecast.masks import attach_masks, weather_channels
    from bikecast.series import aggregate_stations

    config = ScenarioConfig(
        n_stations=4,
        days=90,
        resolution_minutes=30,
        daily_checkouts_per_station=1200.0,
        weather_weights={"wind_kmh": 2.0, "precipitation_mm": 6.0},
        events_per_week=0.0,
        noise_level=0.1,
        weather_persistence_hours=96.0,
        weather_persistence_overrides={"precipitation_mm": 4.0},
        weather_effect_lag_hours=4.0,
        seed=42,
    )
    network = generate_network(
        config.n_stations, config.bounding_box, config.capacity_range,
        seed=config.seed,
    )
    result = generate_scenario(network, config)
    demand = aggregate_stations(result.demand_out, [s.id for s in network])
    centroid = (
        float(np.mean([s.latitude for s in network])),
        float(np.mean([s.longitude for s in network])),
    )
    channels = weather_channels(
        result.weather, centroid, 1, list(LIFT_MASK_CHANNELS),
        demand.start, demand.resolution, demand.length,
    )
    return config, result, demand, attach_masks(demand, channels)


class TestCriterion8ContextLift:
    """Context masks must buy real accuracy on a weather-driven scenario.

    The scenario is calibrated so weather genuinely drives demand (daily
    wind vs. demand correlation below -0.5): wind is slow-moving (96 h
    AR(1)), precipitation is fast (4 h), and riders react to conditions
    from 4 h back.  The lift thresholds are generator-calibrated targets.
    MAEs are averaged over two training seeds per model so the verdict is
    about the architecture, not one lucky initialisation.
    """

    HORIZON = 48
    INPUT_LEN = 96
    MASK_CHANNELS = LIFT_MASK_CHANNELS

    def _fold(self, series, prospective=()):
        from bikecast.segmentation import temporal_split, training_index_range

        window = create_subdatasets(series, 60, 14)[0]
        instances = segment_instances(
            window, self.HORIZON, "checkout_demand",
            input_len=self.INPUT_LEN, slide=4,
            prospective_channels=prospective,
        )
        fold = temporal_split(instances, (0.6, 0.2, 0.2))
        return fold, fit_minmax(window, training_index_range(fold, window))

    def _test_mae(self, series, seed, prospective=(), with_c2=False):
        from bikecast.recurrent import TrainConfig, build_serial_model, forecast, train

        fold, scaler = self._fold(series, prospective)
        train_config = TrainConfig(
            learning_rate=3e-3, batch_size=8, max_epochs=60, patience=15,
            dropout_rate=0.1, hidden_c1=32, hidden_c2=32, seed=seed,
            cell_c1="lstm",
        )
        model = build_serial_model(
            series.channels, "checkout_demand", prospective,
            self.INPUT_LEN, self.HORIZON, scaler, train_config, with_c2=with_c2,
        )
        train(model, fold, train_config)
        errors = []
        for instance in fold.test:
            future = (
                model.scale_prospective(instance.prospective.values)
                if with_c2 else None
            )
            prediction = model.scale_target(
                forecast(model, model.scale_inputs(instance.input.values), future),
                "inverse",
            )
            errors.append(np.abs(prediction - instance.output.values[:, 0]).mean())
        return float(np.mean(errors))

    def test_weather_actually_drives_demand(self, context_lift_scenario):
        config, result, demand, _ = context_lift_scenario
        steps = config.steps_per_day
        values = demand.values[:, 0]
        wind_hourly = np.mean(
            [ts.channel("wind_kmh") for _, ts in result.weather.values()], axis=0
        )
        wind = np.repeat(wind_hourly, steps // 24)[: values.size]
        days = values.size // steps
        corr = np.corrcoef(
            values.reshape(days, steps).sum(axis=1),
            wind.reshape(days, steps).mean(axis=1),
        )[0, 1]
        assert corr <= -0.5

    def test_context_lift(self, context_lift_scenario):
        _, _, demand, masked = context_lift_scenario
        start = time.time()

        seeds = (3, 4)
        plain = np.mean([self._test_mae(demand, s) for s in seeds])
        ctx = np.mean([self._test_mae(masked, s) for s in seeds])
        c2 = np.mean([
            self._test_mae(masked, s, prospective=self.MASK_CHANNELS, with_c2=True)
            for s in seeds
        ])

        # (a) the plain LSTM has to beat classical Holt-Winters
        fold, _ = self._fold(demand)
        hw_errors = []
        steps = steps_per_day(demand)
        for instance in fold.test:
            state = holt_winters_fit(
                instance.input.values[:, 0], steps, 0.3, 0.05, 0.2, mode="additive"
            )
            prediction = holt_winters_forecast(state, self.HORIZON)
            hw_errors.append(np.abs(prediction - instance.output.values[:, 0]).mean())
        assert plain < float(np.mean(hw_errors))

        # (b) historical weather masks cut MAE by >= 10 %
        assert ctx <= 0.90 * plain
        # (c) adding C2 with prospective weather cuts >= 5 % more
        assert c2 <= 0.95 * ctx

        assert time.time() - start < 600


class TestCriterion9SignificanceMachinery:
    def test_matches_scipy_on_twenty_datasets(self):
        rng = np.random.default_rng(41)
        for case in range(20):
            n = int(rng.integers(3, 40))
            a = rng.normal(loc=1.0, size=n)
            b = a + rng.normal(scale=0.5, size=n) + 0.1
            alternative = ("A<B", "A>B")[case % 2]
            t, p = paired_t_test(a, b, alternative=alternative)
            ref = scipy.stats.ttest_rel(
                a, b, alternative="less" if alternative == "A<B" else "greater"
            )
            assert t == pytest.approx(ref.statistic, abs=1e-9)
            assert p == pytest.approx(ref.pvalue, abs=1e-6)

    def test_identical_inputs(self):
        x = np.arange(10.0)
        t, p = paired_t_test(x, x.copy(), alternative="A<B")
        assert t == 0.0
        assert p == 0.5


CONFIG_10 = """\
[run]
seed = 13

[scenario]
n_stations = 3
days = 14
daily_checkouts_per_station = 120
wind_weight = 1.0
events_per_week = 0

[data]
resolution_minutes = 60

[target]
horizon = 12

[masks]
channels = day, hour

[segmentation]
folds = 2
window_days = 12
step_days = 2
input_len = 48

[models]
list = hw, knn

[model.hw]
type = holt-winters

[model.knn]
type = knn
k = 3

[output]
figures = false
"""


class TestCriterion10Determinism:
    def test_compare_runs_are_byte_identical(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        cfg.write_text(CONFIG_10)
        outputs = []
        for run in ("one", "two"):
            out = tmp_path / run
            code = cli.main(
                ["compare", "--config", str(cfg), "--out", str(out)]
            )
            assert code == 0
            outputs.append(
                (
                    (out / "report.csv").read_bytes(),
                    (out / "significance.csv").read_bytes(),
                )
            )
        assert outputs[0] == outputs[1]


class TestCriterion11GeneratorLedger:
    def test_twenty_random_scenarios(self):
        rng = np.random.default_rng(43)
        for case in range(20):
            cfg = ScenarioConfig(
                n_stations=int(rng.integers(2, 5)),
                days=int(rng.integers(2, 5)),
                resolution_minutes=int(rng.choice([30, 60])),
                daily_checkouts_per_station=float(rng.uniform(40, 200)),
                weather_weights={"wind_kmh": float(rng.uniform(0, 1.5))},
                events_per_week=float(rng.uniform(0, 2)),
                event_weight=float(rng.uniform(0, 0.5)),
                noise_level=float(rng.uniform(0, 0.3)),
                seed=1000 + case,
            )
            net = generate_network(
                cfg.n_stations, cfg.bounding_box, cfg.capacity_range, seed=cfg.seed
            )
            res = generate_scenario(net, cfg)
            for st in net:
                load = res.loads[st.id]
                ci = res.checkins[st.id].values[:, 0]
                co = res.checkouts[st.id].values[:, 0]
                lv = load.values[:, 0]

                cap = st.capacity[0][1]
                assert (lv >= 0).all() and (lv <= cap).all()
                assert ci[0] == 0 and co[0] == 0
                assert np.array_equal(np.diff(lv), (ci - co)[1:])

                inferred_in, inferred_out = infer_flows(load, st)
                assert np.array_equal(inferred_in.values[:, 0], ci)
                assert np.array_equal(inferred_out.values[:, 0], co)
