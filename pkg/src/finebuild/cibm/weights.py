"""Category information balancing weights.

The sampling weight of class i combines its inverse frequency with the
spread of its samples in a frozen teacher's feature space:

    p_i = x_i / sum_j x_j
    w_i = p_i^-1 / sum_j p_j^-1          (frequency-only weights)
    S_i = sum_{j != k} dis(i, j, k)      (ordered pairs, both directions)
    W_i = S_i p_i^-1 / sum_j S_j p_j^-1  (balanced weights)

Classes whose samples collapse to identical features would get weight zero
and never be drawn; spreads below EPS_SPREAD are floored so every class
stays sampleable. When every spread is zero the weights fall back to the
frequency-only form with a logged warning.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DegenerateWeights, EmptyClass
from .features import FeatureMatrix

logger = logging.getLogger(__name__)

EPS_SPREAD = 1e-12


@dataclass(frozen=True)
class DistanceMatrix:
    class_id: int
    dis: np.ndarray  # (x_i, x_i), symmetric, zero diagonal

    def __post_init__(self):
        n = self.dis.shape[0]
        if self.dis.shape != (n, n):
            raise DegenerateWeights("distance matrix must be square")

    def upper_triangle(self) -> np.ndarray:
        iu = np.triu_indices(self.dis.shape[0], k=1)
        return self.dis[iu]


@dataclass(frozen=True)
class CategoryWeightTable:
    counts: np.ndarray  # x_i, int
    p: np.ndarray
    spreads: np.ndarray  # S_i
    weights: np.ndarray  # W_i
    class_names: tuple[str, ...] = ()

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["class_id", "count", "p", "S", "W"])
            for i in range(len(self.counts)):
                w.writerow(
                    [
                        i,
                        int(self.counts[i]),
                        f"{self.p[i]:.12g}",
                        f"{self.spreads[i]:.12g}",
                        f"{self.weights[i]:.12g}",
                    ]
                )

    @classmethod
    def load(cls, path: Path) -> "CategoryWeightTable":
        rows = list(csv.DictReader(Path(path).open(encoding="utf-8")))
        order = sorted(rows, key=lambda r: int(r["class_id"]))
        return cls(
            counts=np.array([int(r["count"]) for r in order]),
            p=np.array([float(r["p"]) for r in order]),
            spreads=np.array([float(r["S"]) for r in order]),
            weights=np.array([float(r["W"]) for r in order]),
        )


def distance_matrix(fm: FeatureMatrix) -> DistanceMatrix:
    """Pairwise Euclidean distances between a class's feature rows."""
    f = fm.features.astype(np.float64)
    sq = np.sum(f * f, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (f @ f.T)
    np.maximum(d2, 0.0, out=d2)
    dis = np.sqrt(d2)
    np.fill_diagonal(dis, 0.0)
    dis = 0.5 * (dis + dis.T)
    return DistanceMatrix(class_id=fm.class_id, dis=dis)


def frequency_weights(counts) -> np.ndarray:
    """Inverse-frequency weights: w_i = p_i^-1 / sum p^-1."""
    x = np.asarray(counts, dtype=np.float64)
    if x.size < 1:
        raise EmptyClass("no classes given")
    if np.any(x < 1):
        raise EmptyClass(f"every class needs at least one sample, got {counts}")
    p = x / x.sum()
    inv = 1.0 / p
    return inv / inv.sum()


def compute_spreads(dms: list[DistanceMatrix], norm: str = "raw") -> np.ndarray:
    """S_i = sum over ordered pairs (j != k) of the class distance matrix.

    norm='mean' divides by the pair count x_i (x_i - 1), giving the mean
    pairwise distance instead of the raw sum (opt-in; the raw sum grows
    quadratically with class size).
    """
    if norm not in ("raw", "mean"):
        raise DegenerateWeights(f"unknown spread norm {norm!r}")
    spreads = []
    for dm in dms:
        n = dm.dis.shape[0]
        total = float(dm.dis.sum())  # diagonal is zero, so this is sum over j != k
        if norm == "mean":
            pairs = n * (n - 1)
            total = total / pairs if pairs > 0 else 0.0
        spreads.append(total)
    return np.array(spreads, dtype=np.float64)


def cibm_weights(counts, spreads) -> np.ndarray:
    """Balanced sampling weights W_i = S_i p_i^-1 / sum_j S_j p_j^-1.

    Spreads below EPS_SPREAD are floored to keep zero-spread classes
    sampleable; if every spread is zero the result falls back to
    frequency_weights (logged).
    """
    x = np.asarray(counts, dtype=np.float64)
    s = np.asarray(spreads, dtype=np.float64)
    if x.shape != s.shape:
        raise DegenerateWeights("counts and spreads must align")
    if np.any(s < 0):
        raise DegenerateWeights("spreads must be nonnegative")
    if np.all(s == 0.0):
        logger.warning(
            "all class spreads are zero; falling back to frequency-only weights"
        )
        return frequency_weights(counts)
    s = np.maximum(s, EPS_SPREAD)
    p = x / x.sum()
    raw = s / p
    return raw / raw.sum()


def build_weight_table(
    feature_matrices: list[FeatureMatrix],
    counts,
    *,
    spread_norm: str = "raw",
    class_names: tuple[str, ...] = (),
) -> tuple[CategoryWeightTable, list[DistanceMatrix]]:
    """Full pipeline from per-class features to the persisted weight table."""
    dms = [distance_matrix(fm) for fm in feature_matrices]
    spreads = compute_spreads(dms, norm=spread_norm)
    weights = cibm_weights(counts, spreads)
    x = np.asarray(counts, dtype=np.float64)
    table = CategoryWeightTable(
        counts=np.asarray(counts, dtype=np.int64),
        p=x / x.sum(),
        spreads=spreads,
        weights=weights,
        class_names=class_names,
    )
    return table, dms
