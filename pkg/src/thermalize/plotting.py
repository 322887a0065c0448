"""Matplotlib helpers for the figure files written next to each CSV table."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed hash salt and no timestamp keep SVG output byte-stable between runs
STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 11,
    "axes.labelsize": 12,
    "axes.titlesize": 12,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 9,
    "legend.frameon": False,
    "lines.linewidth": 1.6,
    "svg.hashsalt": "thermalize",
    "svg.fonttype": "none",
}


def line_plot(path, x, series, xlabel, ylabel, title=None, logy=False, markers=None):
    """Write one figure with a line per entry of ``series`` (label -> y values)."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in series.items():
            style = (markers or {}).get(label, "-")
            ax.plot(x, y, style, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if logy:
            ax.set_yscale("log")
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
    return path


def family_plot(path, x, curves, xlabel, ylabel, title=None, label_fmt="{}"):
    """Overlay curves keyed by a parameter value, e.g. distance vs T at several times."""
    return line_plot(path, x, {label_fmt.format(k): v for k, v in curves.items()}, xlabel, ylabel, title)
