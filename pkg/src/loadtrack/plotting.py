"""Report figures, written straight to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 0.9,
}

FALLBACK_COLORS = ["tab:blue", "tab:red", "tab:green", "tab:orange", "tab:purple",
                   "tab:brown", "tab:pink", "tab:gray", "tab:olive", "tab:cyan"]


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _palette(labels, colors):
    """One colour per label, shared by every panel."""
    out = {}
    spare = iter(c for c in FALLBACK_COLORS if c not in (colors or {}).values())
    for label in labels:
        if colors and label in colors:
            out[label] = colors[label]
        elif label not in out:
            out[label] = next(spare, "black")
    return out


def plot_filter_comparison(raw, filtered, path, width=10):
    """Raw signal next to the filter-pipeline output."""
    raw = np.asarray(raw)
    filtered = np.asarray(filtered)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(width, width * 0.3), sharey=True)
        axes[0].plot(raw, color="0.3")
        axes[0].set_title("raw aggregate")
        axes[1].plot(filtered, color="tab:blue")
        axes[1].set_title("filtered")
        for ax in axes:
            ax.set_xlabel("sample")
        axes[0].set_ylabel("power (W)")
        return _finish(fig, path)


def plot_disaggregation(tracked: dict, path, truth: dict | None = None, aggregate=None,
                        colors: dict | None = None, width=10):
    """Per-appliance traces (truth on top when given) and aggregate comparison.

    ``tracked`` and ``truth`` map label -> watt array; ``aggregate`` is the
    signal the tracked total is compared against in the bottom panel.
    """
    palette = _palette(list(truth or {}) + list(tracked), colors)
    panels = (["truth"] if truth else []) + ["tracked"] + (["aggregate"] if aggregate is not None else [])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(panels), 1, figsize=(width, 2.2 * len(panels)), sharex=True,
                                 squeeze=False)
        axes = axes[:, 0]
        row = 0
        if truth:
            for label, tr in truth.items():
                axes[row].plot(np.asarray(tr), label=label, color=palette[label])
            axes[row].set_title("ground truth")
            axes[row].legend(loc="upper right")
            row += 1
        for label, tr in tracked.items():
            axes[row].plot(np.asarray(tr), label=label, color=palette[label])
        axes[row].set_title("tracked")
        if tracked:
            axes[row].legend(loc="upper right")
        row += 1
        if aggregate is not None:
            total = np.zeros(len(aggregate))
            for tr in tracked.values():
                total = total + np.asarray(tr)
            axes[row].plot(np.asarray(aggregate), color="0.4", label="aggregate")
            axes[row].plot(total, color="tab:red", label="tracked total")
            axes[row].set_title("aggregate vs tracked")
            axes[row].legend(loc="upper right")
        for ax in axes:
            ax.set_ylabel("W")
        axes[-1].set_xlabel("sample")
        return _finish(fig, path)
