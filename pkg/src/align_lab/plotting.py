"""Matplotlib figures for exported run directories.

Each figure aggregates seeds per sweep point (mean line, +-1 std band) and is
written next to the tidy CSVs produced by :mod:`align_lab.reporting`.
"""

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 120,
}


def _by_point(runs):
    grouped = defaultdict(list)
    for run in runs:
        grouped[run["point"]].append(run["records"])
    return dict(sorted(grouped.items()))


def _band(ax, epochs, values, label):
    values = np.asarray(values, dtype=np.float64)
    mean = np.nanmean(values, axis=0)
    ax.plot(epochs, mean, label=label, lw=1.2)
    if values.shape[0] > 1:
        std = np.nanstd(values, axis=0)
        ax.fill_between(epochs, mean - std, mean + std, alpha=0.2, lw=0)


def _series(record_sets, attr):
    length = min(len(r) for r in record_sets)
    epochs = [rec.epoch for rec in record_sets[0][:length]]
    return epochs, [[getattr(rec, attr) for rec in r[:length]] for r in record_sets]


def plot_metric(runs, attr: str, ylabel: str, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for point, record_sets in _by_point(runs).items():
            epochs, values = _series(record_sets, attr)
            _band(ax, epochs, values, point)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        if len(_by_point(runs)) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_pseudo_histogram(runs, path) -> Path:
    """Stacked class fractions of accepted pseudo-labels, one panel per sweep point."""
    grouped = _by_point(runs)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(grouped), squeeze=False,
                                 figsize=(3.2 * len(grouped), 3.0), sharey=True)
        for ax, (point, record_sets) in zip(axes[0], grouped.items()):
            length = min(len(r) for r in record_sets)
            epochs = [rec.epoch for rec in record_sets[0][:length]]
            counts = np.array([[rec.pseudo_label_histogram for rec in r[:length]]
                               for r in record_sets], dtype=np.float64).sum(axis=0)
            totals = counts.sum(axis=1, keepdims=True)
            frac = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
            ax.stackplot(epochs, frac.T, labels=[f"class {c}" for c in range(frac.shape[1])])
            ax.set_title(point, fontsize=8)
            ax.set_xlabel("epoch")
        axes[0][0].set_ylabel("fraction of accepted")
        axes[0][-1].legend(frameon=False, loc="center left", bbox_to_anchor=(1.0, 0.5))
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_figures(runs, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        plot_metric(runs, "val_auc", "validation AUC", out_dir / "auc_vs_epoch.png"),
        plot_metric(runs, "val_mca", "validation MCA", out_dir / "mca_vs_epoch.png"),
        plot_metric(runs, "frobenius_distance", "Frobenius distance",
                    out_dir / "frobenius_vs_epoch.png"),
        plot_pseudo_histogram(runs, out_dir / "pseudo_histogram_vs_epoch.png"),
    ]
