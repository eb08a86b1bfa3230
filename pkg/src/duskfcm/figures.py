"""Report figures written next to the CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PANELS = (("sa", "Accuracy"), ("precision", "Precision"), ("iou", "IoU"))

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def plot_benchmark(rows, path):
    """Three bar panels (accuracy, precision, IoU), one bar per method."""
    methods = [r["method"] for r in rows]
    x = np.arange(len(methods))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(PANELS), figsize=(3.0 * len(PANELS), 2.8), sharey=True)
        for ax, (key, title) in zip(axes, PANELS):
            values = [r[key] for r in rows]
            bars = ax.bar(x, values, color="0.55", edgecolor="0.2", linewidth=0.6)
            for bar, v in zip(bars, values):
                ax.text(bar.get_x() + bar.get_width() / 2, v + 0.01, f"{v:.3f}",
                        ha="center", va="bottom", fontsize=7)
            ax.set_xticks(x)
            ax.set_xticklabels(methods, rotation=30, ha="right")
            ax.set_title(title)
            ax.set_ylim(0, 1.08)
        axes[0].set_ylabel("mean over samples")
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_convergence(report, path, max_lines=20):
    """Objective traces of the first ``max_lines`` samples, normalized by their first value."""
    traces = [(sid, e.get("objective") or []) for sid, e in report.samples.items()]
    traces = [(sid, t) for sid, t in traces if len(t) > 1][:max_lines]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.8))
        for sid, trace in traces:
            t = np.asarray(trace, dtype=float)
            scale = abs(t[0]) if t[0] != 0 else 1.0
            ax.plot(np.arange(1, len(t) + 1), t / scale, linewidth=0.8, label=sid)
        ax.set_xlabel("iteration")
        ax.set_ylabel("objective / first value")
        ax.set_title(report.config.get("method", ""))
        if 0 < len(traces) <= 8:
            ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)
    return path
