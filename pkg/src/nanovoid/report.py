"""Figure rendering for training histories and evaluation metrics.

Uses the Agg backend only; every figure goes straight to a file next to
the delimited output it illustrates.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def save_history_figure(history, path) -> None:
    """Loss curves (mismatch, both penalties, total) against iteration."""
    iterations = list(range(len(history)))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(iterations, [r.total for r in history], label="total", lw=2, color="k")
    ax.plot(iterations, [r.mismatch for r in history], label="mismatch", lw=1.2)
    ax.plot(iterations, [r.penalty_lo for r in history], label="penalty_lo", lw=1.2)
    ax.plot(iterations, [r.penalty_hi for r in history], label="penalty_hi", lw=1.2)
    if all(r.total > 0 for r in history):
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend(loc="best", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_metrics_figure(rows, path) -> None:
    """Per-frame IOU and pixel accuracy as grouped bars.

    rows: list of (frame name, iou, pixel_accuracy).
    """
    names = [r[0] for r in rows]
    ious = [r[1] for r in rows]
    accs = [r[2] for r in rows]
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(rows) + 2), 4))
    ax.bar([i - 0.2 for i in x], ious, width=0.4, label="iou")
    ax.bar([i + 0.2 for i in x], accs, width=0.4, label="pixel_accuracy")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
