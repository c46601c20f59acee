"""Figures for sweep and evaluation reports (written to files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from qedl.evaluation import EvalReport, SweepReport  # noqa: E402

# fixed metadata keeps PNG output byte-stable across runs
_PNG_META = {"Software": None}


def plot_sweep(report: SweepReport, path: str | Path) -> Path:
    """F1, precision and recall against training size, one line per method."""
    methods = list(dict.fromkeys(r.method for r in report.rows))
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), sharex=True)
    for ax, metric in zip(axes, ("f1", "precision", "recall")):
        for m in methods:
            rows = report.series(m)
            ax.plot([r.size for r in rows], [getattr(r, metric) for r in rows], marker="o", label=m)
        ax.set_title(metric)
        ax.set_xlabel("training questions")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("score")
    axes[0].legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_report(report: EvalReport, path: str | Path) -> Path:
    """Bar chart of the QED, EL and overall scores."""
    labels = ["QED P", "QED R", "QED F1", "EL acc", "All P", "All R", "All F1"]
    values = [report.qed.precision, report.qed.recall, report.qed.f1, report.el_accuracy,
              report.overall.precision, report.overall.recall, report.overall.f1]
    colors = ["C0"] * 3 + ["C1"] + ["C2"] * 3
    fig, ax = plt.subplots(figsize=(7, 3.4))
    ax.bar(labels, values, color=colors)
    for i, v in enumerate(values):
        ax.text(i, v + 0.01, f"{v:.3f}", ha="center", fontsize="small")
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("score")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path
