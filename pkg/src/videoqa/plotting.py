"""Figures for training runs and evaluation reports, written as PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evalharness import REFERENCE_ROWS, CategoryReport  # noqa: E402
from .questlang import CATEGORIES  # noqa: E402

# Fixed metadata keeps repeated renders byte-identical.
_META = {"Software": None}


def loss_curve(losses: Sequence[float], path, title: str = "Training loss") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(1, len(losses) + 1), losses, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean clip loss")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return Path(path)


def category_bars(report: CategoryReport, path, label: str = "This run", references: bool = True) -> Path:
    """Per-category accuracy bars, optionally beside the published reference rows."""
    rows = [(label, [100 * (report.accuracy(c) or 0.0) for c in CATEGORIES])]
    if references:
        rows += [(name, list(vals)) for name, *vals in REFERENCE_ROWS]
    fig, ax = plt.subplots(figsize=(7, 3.6))
    width = 0.8 / len(rows)
    for i, (name, vals) in enumerate(rows):
        xs = [c + (i - (len(rows) - 1) / 2) * width for c in range(len(CATEGORIES))]
        ax.bar(xs, vals, width, label=name, hatch=None if i == 0 else "//", alpha=1.0 if i == 0 else 0.55)
    ax.set_xticks(range(len(CATEGORIES)), [f"{c} %" for c in CATEGORIES])
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy %")
    ax.legend(fontsize=6, ncol=2, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return Path(path)
