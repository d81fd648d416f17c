"""Histogram figures in the style of the registration-error plots (percent per bin)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (4.0, 3.0),
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "frustreg",  # stable element ids across runs
    "svg.fonttype": "none",
}


def histogram_figure(edges, percentages, xlabel: str, path, color: str = "#4c72b0") -> None:
    """Bar chart of ``percentages`` over bins ``edges``; format follows the file suffix."""
    edges = np.asarray(edges, dtype=float)
    pct = np.asarray(percentages, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(edges[:-1], pct, width=np.diff(edges), align="edge", color=color, edgecolor="white", linewidth=0.5)
        ax.set_xlim(edges[0], edges[-1])
        ax.set_xlabel(xlabel)
        ax.set_ylabel("Percentage (%)")
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
