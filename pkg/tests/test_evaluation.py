import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given, strategies as st

from bikecast.errors import EmptyFolds, LengthMismatch, TooFewPairs
from bikecast.evaluation import (
    ModelEvaluation,
    betainc,
    compare_models,
    evaluate_folds,
    metrics,
    paired_t_test,
    student_t_cdf,
)
from bikecast.segmentation import segment_instances, temporal_split

from conftest import make_series


class TestMetrics:
    def test_values(self):
        mae, rmse = metrics(np.array([1.0, 2.0]), np.array([0.0, 4.0]))
        assert mae == pytest.approx(1.5)
        assert rmse == pytest.approx(np.sqrt(2.5))

    def test_perfect_forecast(self):
        mae, rmse = metrics(np.ones(5), np.ones(5))
        assert (mae, rmse) == (0.0, 0.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            metrics(np.ones(3), np.ones(4))

    @given(
        st.lists(
            st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
            min_size=1,
            max_size=40,
        )
    )
    def test_rmse_dominates_mae(self, residues):
        pred = np.asarray(residues)
        mae, rmse = metrics(pred, np.zeros_like(pred))
        assert rmse >= mae - 1e-12


class TestStudentT:
    def test_betainc_matches_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.uniform(0.5, 20.0, size=2)
            x = rng.uniform(0.0, 1.0)
            assert betainc(a, b, x) == pytest.approx(
                scipy.special.betainc(a, b, x), abs=1e-10
            )

    def test_cdf_matches_scipy(self):
        for df in (1, 2, 5, 10, 29, 100):
            for t in (-4.0, -1.3, 0.0, 0.7, 2.5):
                assert student_t_cdf(t, df) == pytest.approx(
                    scipy.stats.t.cdf(t, df), abs=1e-10
                )


class TestPairedTTest:
    def test_matches_scipy_one_sided(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(5, 40))
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.5, size=n) + rng.normal() * 0.2
            t, p = paired_t_test(a, b, "A<B")
            ref = scipy.stats.ttest_rel(a, b, alternative="less")
            assert t == pytest.approx(ref.statistic, abs=1e-10)
            assert p == pytest.approx(ref.pvalue, abs=1e-6)
            t2, p2 = paired_t_test(a, b, "A>B")
            ref2 = scipy.stats.ttest_rel(a, b, alternative="greater")
            assert p2 == pytest.approx(ref2.pvalue, abs=1e-6)

    def test_identical_inputs(self):
        a = np.array([1.0, 2.0, 3.0])
        t, p = paired_t_test(a, a.copy(), "A<B")
        assert t == 0.0
        assert p == 0.5

    def test_zero_variance_nonzero_difference(self):
        a = np.array([1.0, 2.0, 3.0])
        b = a + 1.0  # constant positive difference: A < B certainly
        _, p_less = paired_t_test(a, b, "A<B")
        _, p_greater = paired_t_test(a, b, "A>B")
        assert p_less == 0.0
        assert p_greater == 1.0

    def test_too_few_pairs(self):
        with pytest.raises(TooFewPairs):
            paired_t_test(np.ones(1), np.ones(1), "A<B")

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            paired_t_test(np.ones(3), np.ones(4), "A<B")

    def test_bad_alternative(self):
        with pytest.raises(ValueError):
            paired_t_test(np.ones(3), np.zeros(3), "A=B")


def make_folds(n_folds=2):
    folds = []
    for f in range(n_folds):
        series = make_series(
            np.arange(20.0) + 100 * f, channels=("checkouts",)
        )
        instances = segment_instances(series, 2, "checkouts", input_len=4, slide=1)
        folds.append(temporal_split(instances, (0.6, 0.2, 0.2)))
    return folds


class TestEvaluateFolds:
    def test_pools_across_folds(self):
        folds = make_folds(2)

        def factory(fold):
            return lambda inst: inst.output.values[:, 0] + 1.0  # constant +1 error

        ev = evaluate_folds("biased", factory, folds)
        assert len(ev.per_fold_mae) == 2
        assert ev.mae_values == pytest.approx(np.ones(len(ev.mae_values)))
        s = ev.summary()
        assert s["mae_mean"] == pytest.approx(1.0)
        assert s["mae_std"] == pytest.approx(0.0)
        assert s["rmse_mean"] == pytest.approx(1.0)

    def test_empty_folds(self):
        with pytest.raises(EmptyFolds):
            evaluate_folds("m", lambda f: None, [])


class TestCompareModels:
    def test_pairwise_tests(self):
        folds = make_folds(2)

        def biased(offset):
            def factory(fold):
                return lambda inst: inst.output.values[:, 0] + offset

            return factory

        evs = [
            evaluate_folds("good", biased(0.1), folds),
            evaluate_folds("bad", biased(2.0), folds),
            evaluate_folds("worse", biased(5.0), folds),
        ]
        report = compare_models(evs, "A<B")
        assert len(report.tests) == 3
        names = {(a, b) for a, b, _, _, _ in report.tests}
        assert ("good", "bad") in names
        good_vs_bad = next(t for t in report.tests if t[:2] == ("good", "bad"))
        assert good_vs_bad[4] < 0.01  # strongly significant
