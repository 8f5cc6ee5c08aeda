"""Matplotlib figures for validation runs, rendered to PNG files.

Agreement scatter plots (expert vs pipeline, one per metric) and per-side
confusion-matrix heatmaps. Figures carry fixed metadata so identical inputs
produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": "hipmetrics"}
_DPI = 110


def agreement_scatter(expert, predicted, metric: str, unit: str, path) -> None:
    """Expert-vs-pipeline scatter with the identity line."""
    expert = np.asarray(expert, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    lo = float(min(expert.min(), predicted.min()))
    hi = float(max(expert.max(), predicted.max()))
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad],
            color="#999999", lw=1, zorder=1)
    ax.scatter(expert, predicted, s=18, c="#2f6fde", alpha=0.75, zorder=2)
    ax.set_xlabel(f"expert {metric} ({unit})")
    ax.set_ylabel(f"pipeline {metric} ({unit})")
    ax.set_title(f"{metric} agreement (n={len(expert)})", fontsize=10)
    ax.set_xlim(lo - pad, hi + pad)
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_aspect("equal")
    fig.tight_layout()
    _save(fig, path)


def confusion_heatmap(counts, classes, title: str, path) -> None:
    counts = np.asarray(counts, dtype=int)
    fig, ax = plt.subplots(figsize=(4.0, 3.6))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(classes)), [str(c) for c in classes])
    ax.set_yticks(range(len(classes)), [str(c) for c in classes])
    ax.set_xlabel("predicted grade")
    ax.set_ylabel("expert grade")
    ax.set_title(title, fontsize=10)
    vmax = counts.max() if counts.size else 0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            color = "white" if vmax and counts[i, j] > 0.6 * vmax else "#1a1a1a"
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center",
                    color=color, fontsize=9)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    _save(fig, path)


def _save(fig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, metadata=dict(_PNG_METADATA))
    plt.close(fig)
