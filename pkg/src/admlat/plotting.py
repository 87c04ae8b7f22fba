"""PNG figures rendered next to CSV outputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    # fixed metadata keeps reruns byte-identical
    "svg.hashsalt": "lat",
}


def figure_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".png")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_xy(path, x, series: dict, xlabel: str, ylabel: str, title: str = "", fit: str | None = None) -> Path:
    """Line plot of one or more named series against x; ``fit`` names a series to regress on x."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.asarray(x, dtype=float)
        for name, y in series.items():
            ax.plot(x, np.asarray(y, dtype=float), marker="o", ms=3, lw=1, label=name)
        if fit is not None and len(x) > 1:
            slope, icpt = np.polyfit(x, np.asarray(series[fit], dtype=float), 1)
            ax.plot(x, slope * x + icpt, ls="--", lw=0.8, color="0.4", label=f"fit slope {slope:.3g}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def plot_scatter(path, x, y, xlabel: str, ylabel: str, title: str = "", diagonal: bool = False) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(np.asarray(x, dtype=float), np.asarray(y, dtype=float), s=10)
        if diagonal:
            lo = float(min(np.min(x), np.min(y)))
            hi = float(max(np.max(x), np.max(y)))
            ax.plot([lo, hi], [lo, hi], ls="--", lw=0.8, color="0.4")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        return _save(fig, Path(path))
