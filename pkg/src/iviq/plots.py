"""Figure rendering for report files. Kept out of the metric pipeline: the
report carries the curve data, these functions only draw it."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import ExperimentReport


def plot_recall_curves(report: ExperimentReport, path: str | Path) -> Path:
    """Recall vs number of interaction rounds, one line per K."""
    rounds = [s.round_index for s in report.snapshots]
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in (
        ("R@1", [s.recall_at_1 for s in report.snapshots]),
        ("R@5", [s.recall_at_5 for s in report.snapshots]),
        ("R@10", [s.recall_at_10 for s in report.snapshots]),
    ):
        ax.plot(rounds, values, marker="o", label=label)
    ax.set_xlabel("interaction rounds")
    ax.set_ylabel("recall (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"{report.corpus.get('name', 'corpus')} - {report.config.get('generator')}")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_median_rank(report: ExperimentReport, path: str | Path) -> Path:
    rounds = [s.round_index for s in report.snapshots]
    medians = [s.median_rank for s in report.snapshots]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, medians, marker="s", color="tab:red")
    ax.set_xlabel("interaction rounds")
    ax.set_ylabel("median rank")
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_latency_table(table: dict, path: str | Path) -> Path:
    """Bar chart of mean per-answer latency per provider."""
    providers = list(table["providers"].keys())
    means = [table["providers"][p]["mean_s"] for p in providers]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(providers, means, color="tab:blue")
    ax.set_ylabel("mean time per answer (s)")
    ax.set_title(f"answer latency over {table['sample_n']} videos")
    for i, mean in enumerate(means):
        ax.text(i, mean, f"{mean:.3f}", ha="center", va="bottom")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
