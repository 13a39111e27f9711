"""Fold-level error aggregation and one-sided paired significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyFolds, LengthMismatch, TooFewPairs
from .segmentation import Fold


def metrics(forecast, truth) -> tuple[float, float]:
    """(MAE, RMSE) of a forecast against the realized series."""
    f = np.asarray(forecast, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if f.shape != t.shape:
        raise LengthMismatch(f"forecast length {f.shape} != truth length {t.shape}")
    err = f - t
    return float(np.abs(err).mean()), float(np.sqrt((err ** 2).mean()))


@dataclass
class ModelEvaluation:
    """Per-instance errors of one model pooled across folds."""

    name: str
    per_fold_mae: list[np.ndarray] = field(default_factory=list)
    per_fold_rmse: list[np.ndarray] = field(default_factory=list)
    per_fold_residues: list[np.ndarray] = field(default_factory=list)

    @property
    def mae_values(self) -> np.ndarray:
        return np.concatenate(self.per_fold_mae)

    @property
    def rmse_values(self) -> np.ndarray:
        return np.concatenate(self.per_fold_rmse)

    def summary(self) -> dict[str, float]:
        mae = self.mae_values
        rmse = self.rmse_values
        return {
            "mae_mean": float(mae.mean()),
            "mae_std": float(mae.std()),
            "rmse_mean": float(rmse.mean()),
            "rmse_std": float(rmse.std()),
        }


@dataclass
class EvaluationReport:
    models: dict[str, ModelEvaluation] = field(default_factory=dict)
    tests: list[tuple[str, str, str, float, float]] = field(default_factory=list)


def evaluate_folds(
    name: str,
    forecaster_factory: Callable[[Fold], Callable],
    folds: Sequence[Fold],
) -> ModelEvaluation:
    """Train per fold and collect per-test-instance MAE/RMSE.

    ``forecaster_factory(fold)`` returns a callable mapping a test instance
    to its forecast in original demand units.
    """
    if not folds:
        raise EmptyFolds("no folds to evaluate")
    result = ModelEvaluation(name)
    for fold in folds:
        predict = forecaster_factory(fold)
        maes, rmses, residues = [], [], []
        for inst in fold.test:
            pred = np.asarray(predict(inst), dtype=np.float64).reshape(-1)
            truth = inst.output.values[:, 0]
            mae, rmse = metrics(pred, truth)
            maes.append(mae)
            rmses.append(rmse)
            residues.append(pred - truth)
        result.per_fold_mae.append(np.asarray(maes))
        result.per_fold_rmse.append(np.asarray(rmses))
        result.per_fold_residues.append(np.concatenate(residues) if residues else np.empty(0))
    return result


# -- Student t machinery -------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            return h
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """P(T <= t) for Student t with df degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t < 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return tail if t < 0 else 1.0 - tail


def paired_t_test(
    res_a: Sequence[float], res_b: Sequence[float], alternative: str = "A<B"
) -> tuple[float, float]:
    """One-sided paired t-test on per-instance metric vectors.

    ``alternative`` 'A<B' tests whether model A's errors are lower; 'A>B'
    the reverse. Zero-variance differences report p = 0 or 1 by the sign of
    the mean difference (0.5 when the means tie).
    """
    a = np.asarray(res_a, dtype=np.float64).reshape(-1)
    b = np.asarray(res_b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise LengthMismatch("paired vectors differ in length")
    n = a.shape[0]
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n}")
    if alternative not in ("A<B", "A>B"):
        raise ValueError(f"unknown alternative {alternative!r}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 0.5
        t = math.inf if mean > 0 else -math.inf
    else:
        t = mean / (sd / math.sqrt(n))
    if alternative == "A<B":
        p = student_t_cdf(t, n - 1)
    else:
        p = 1.0 - student_t_cdf(t, n - 1)
    return float(t), float(p)


def compare_models(
    evaluations: Sequence[ModelEvaluation],
    alternative: str = "A<B",
) -> EvaluationReport:
    """Pairwise one-sided tests on pooled per-instance MAE vectors."""
    report = EvaluationReport()
    for ev in evaluations:
        report.models[ev.name] = ev
    names = [ev.name for ev in evaluations]
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            va = report.models[a].mae_values
            vb = report.models[b].mae_values
            t, p = paired_t_test(va, vb, alternative)
            report.tests.append((a, b, alternative, t, p))
    return report
