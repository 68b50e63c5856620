"""Report figures rendered to files next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from annealopt.schedule import DesignVector, render_grid

METHOD_COLORS = {
    "turbo": "tab:blue",
    "rs": "tab:orange",
    "gs": "tab:green",
    "sa": "tab:red",
    "ga": "tab:purple",
    "exact": "black",
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_metric_vs_n(df: pd.DataFrame, metric: str, out_path: Path, ylabel: str | None = None) -> Path | None:
    """Mean metric against city count, one line per method."""
    sub = df[df["metric"] == metric]
    if sub.empty:
        return None
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for method, grp in sub.groupby("method"):
        means = grp.groupby("n_cities")["value"].mean()
        ax.plot(
            means.index, means.values, marker="o",
            color=METHOD_COLORS.get(method), label=method,
        )
    ax.set_xlabel("cities N")
    ax.set_ylabel(ylabel or metric)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, out_path)


def plot_convergence(histories: dict[str, list[pd.DataFrame]], out_path: Path) -> Path | None:
    """Best-so-far energy per iteration, averaged over a method's runs."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    plotted = False
    for method, frames in histories.items():
        curves = []
        for frame in frames:
            best = np.minimum.accumulate(frame["energy"].to_numpy(dtype=float))
            curves.append(best)
        if not curves:
            continue
        n = min(len(c) for c in curves)
        stack = np.vstack([c[:n] for c in curves])
        mean = stack.mean(axis=0)
        ax.plot(np.arange(1, n + 1), mean, color=METHOD_COLORS.get(method), label=method)
        if stack.shape[0] > 1:
            ax.fill_between(
                np.arange(1, n + 1),
                mean - stack.std(axis=0),
                mean + stack.std(axis=0),
                color=METHOD_COLORS.get(method), alpha=0.2,
            )
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.set_xlabel("evaluation")
    ax.set_ylabel("best energy so far")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, out_path)


def plot_schedules(best_rows: dict[str, dict], out_path: Path, grid_points: int = 64) -> Path | None:
    """Rendered best schedule per method on a normalized time axis."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    plotted = False
    for method, row in best_rows.items():
        dv = DesignVector(T=float(row["T_us"]), thetas=np.asarray(row["thetas"], dtype=float))
        grid = render_grid(dv, p=grid_points)
        ax.plot(
            grid.times / grid.total_time, grid.values,
            color=METHOD_COLORS.get(method),
            label=f"{method} (T={dv.T:.1f}us)",
        )
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.plot([0, 1], [0, 1], "k--", alpha=0.4, label="linear")
    ax.set_xlabel("t / T")
    ax.set_ylabel("s(t)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, out_path)
