"""Matplotlib figures for tradeoff curves and experiment records (written to files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_tradeoff(curves: dict, path, title: str = "Space/time tradeoffs") -> None:
    """``curves`` maps a label to rows (space_exp, preproc_exp, query_exp, u)."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, rows in curves.items():
        rows = np.asarray(rows, dtype=float)
        ax.plot(rows[:, 0], rows[:, 2], label=label, lw=1.6)
    ax.set_xlabel("space exponent (log2 S / d)")
    ax.set_ylabel("query time exponent (log2 T / d)")
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_listsize(ax, record):
    d = np.array([t["dimension"] for t in record.trials], dtype=float)
    y = np.array([t["log2_list_size"] for t in record.trials])
    ax.scatter(d, y, s=14, label="trials")
    if "slope" in record.summary:
        xs = np.linspace(d.min(), d.max(), 20)
        ax.plot(xs, record.summary["slope"] * xs + record.summary["intercept"], "k--",
                label=f"fit slope {record.summary['slope']:.3f}")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("log2 |L|")


def _plot_rates(ax, record):
    keys = [k for k, v in record.summary.items() if isinstance(v, (int, float))]
    ax.bar(range(len(keys)), [record.summary[k] for k in keys])
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(keys, rotation=30, ha="right", fontsize=8)


def _plot_lemma2(ax, record):
    dims = sorted({t["dimension"] for t in record.trials})
    emp = [record.summary[f"d{d}"]["rate"] for d in dims]
    pred = [record.summary[f"d{d}"]["predicted"] for d in dims]
    ax.semilogy(dims, emp, "o-", label="empirical")
    ax.semilogy(dims, pred, "s--", label="(3/4)^(d/2)")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("reduction probability")


def plot_experiment(record, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if record.experiment == "listsize":
        _plot_listsize(ax, record)
    elif record.experiment == "lemma2-mc":
        _plot_lemma2(ax, record)
    else:
        _plot_rates(ax, record)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    ax.set_title(record.experiment)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
