"""Static plot emission for evaluation reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def per_class_bars(
    class_names: list[str],
    precision: np.ndarray,
    recall: np.ndarray,
    f1: np.ndarray,
    out_png: Path,
) -> None:
    """Grouped precision/recall/F1 bars per class."""
    x = np.arange(len(class_names))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6, len(class_names) * 0.9), 3.5))
    ax.bar(x - width, 100 * np.asarray(precision), width, label="Precision")
    ax.bar(x, 100 * np.asarray(recall), width, label="Recall")
    ax.bar(x + width, 100 * np.asarray(f1), width, label="F1")
    ax.set_xticks(x)
    ax.set_xticklabels(class_names, rotation=30, ha="right")
    ax.set_ylabel("%")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
