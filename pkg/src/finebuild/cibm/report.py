"""Intra-class distance spread report: histograms and summary statistics
over the upper-triangle pairwise distances of each class."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .weights import DistanceMatrix


def intra_class_spread_report(
    dms: list[DistanceMatrix],
    out_dir: Path,
    *,
    bins: int = 30,
    class_names: tuple[str, ...] = (),
) -> dict[int, dict[str, float]]:
    """Write per-class histogram CSVs and plots plus a summary CSV.

    Returns {class_id: {pairs, mean, median, std}} for programmatic use.
    The distributions describe the training split before any reweighted
    training takes place.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict[int, dict[str, float]] = {}
    for dm in dms:
        name = (
            class_names[dm.class_id]
            if dm.class_id < len(class_names)
            else f"class_{dm.class_id}"
        )
        upper = dm.upper_triangle()
        if upper.size:
            stats = {
                "pairs": float(upper.size),
                "mean": float(upper.mean()),
                "median": float(np.median(upper)),
                "std": float(upper.std()),
            }
            hi = float(upper.max())
            edges = np.linspace(0.0, hi if hi > 0 else 1.0, bins + 1)
            counts, edges = np.histogram(upper, bins=edges)
        else:
            stats = {"pairs": 0.0, "mean": 0.0, "median": 0.0, "std": 0.0}
            edges = np.linspace(0.0, 1.0, bins + 1)
            counts = np.zeros(bins, dtype=int)
        summary[dm.class_id] = stats

        with (out_dir / f"spread_{name}.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "count"])
            for i in range(bins):
                w.writerow([f"{edges[i]:.6g}", f"{edges[i + 1]:.6g}", int(counts[i])])

        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge")
        ax.set_xlabel("intra-class feature distance")
        ax.set_ylabel("pair count")
        ax.set_title(name)
        fig.tight_layout()
        fig.savefig(out_dir / f"spread_{name}.png", dpi=100)
        plt.close(fig)

    with (out_dir / "spread_summary.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["class_id", "pairs", "mean", "median", "std"])
        for cid in sorted(summary):
            s = summary[cid]
            w.writerow(
                [cid, int(s["pairs"]), f"{s['mean']:.12g}", f"{s['median']:.12g}", f"{s['std']:.12g}"]
            )
    return summary
