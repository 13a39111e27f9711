"""Matplotlib figures rendered alongside the delimited report outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

WEEKDAY_LABELS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


def plot_weekday_profiles(rows: list[dict], path: Path) -> None:
    """One mean-demand curve per weekday over the time of day, with a std band."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for wd in range(7):
        sub = [r for r in rows if r["weekday"] == wd]
        if not sub:
            continue
        sub.sort(key=lambda r: r["step_of_day"])
        steps = [r["step_of_day"] for r in sub]
        means = np.array([r["mean"] for r in sub])
        stds = np.array([r["std"] for r in sub])
        (line,) = ax.plot(steps, means, label=WEEKDAY_LABELS[wd], lw=1.4)
        ax.fill_between(steps, means - stds, means + stds, alpha=0.08, color=line.get_color())
    ax.set_xlabel("step of day")
    ax.set_ylabel("demand")
    ax.legend(ncol=4, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_model_comparison(rows: list[dict], path: Path) -> None:
    """MAE and RMSE bars with std whiskers, one group per model."""
    names = [r["model"] for r in rows]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(x - 0.2, [r["mae_mean"] for r in rows], 0.38, yerr=[r["mae_std"] for r in rows], label="MAE", capsize=3)
    ax.bar(x + 0.2, [r["rmse_mean"] for r in rows], 0.38, yerr=[r["rmse_std"] for r in rows], label="RMSE", capsize=3)
    ax.set_xticks(x, names, rotation=20, ha="right")
    ax.set_ylabel("error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_forecast_example(
    truth: np.ndarray, forecasts: dict[str, np.ndarray], path: Path
) -> None:
    """A single test-instance horizon: realized demand vs. model forecasts."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(truth, color="black", lw=1.8, label="observed")
    for name, pred in forecasts.items():
        ax.plot(pred, lw=1.2, alpha=0.9, label=name)
    ax.set_xlabel("horizon step")
    ax.set_ylabel("demand")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_training_history(history: dict, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for stage, h in history.items():
        ax.plot(h.train_loss, label=f"{stage} train")
        ax.plot(h.val_loss, linestyle="--", label=f"{stage} val")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
