"""Stratified k-fold assignment.

Folding is per class so every fold carries a near-equal share of each
category; with k=5 the usual train/test ratio of 4:1 follows by taking
four folds for training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidFoldCount
from .tiles import LabeledDataset


@dataclass(frozen=True)
class SplitAssignment:
    fold_of_sample: dict[str, int]
    k: int

    def fold_sample_ids(self, fold: int) -> list[str]:
        return [sid for sid, f in self.fold_of_sample.items() if f == fold]


def make_splits(dataset: LabeledDataset, k: int, seed: int) -> SplitAssignment:
    """Assign every sample to one of k folds, stratified per class.

    Per class, fold sizes differ by at most one. Deterministic under seed.
    """
    if k < 2:
        raise InvalidFoldCount(f"k must be >= 2, got {k}")
    counts = dataset.counts()
    for cid, n in enumerate(counts):
        if n < k:
            raise InvalidFoldCount(
                f"class {dataset.class_names[cid]!r} has {n} samples < k={k}"
            )
    rng = np.random.default_rng(seed)
    fold_of_sample: dict[str, int] = {}
    for cid, members in enumerate(dataset.indices_by_class()):
        sids = sorted(dataset.tiles[i].sample_id for i in members)
        order = rng.permutation(len(sids))
        # rotate the remainder start per class so no fold is systematically larger
        for pos, j in enumerate(order):
            fold_of_sample[sids[j]] = (pos + cid) % k
    return SplitAssignment(fold_of_sample=fold_of_sample, k=k)


def split_indices(
    dataset: LabeledDataset, assignment: SplitAssignment, holdout_fold: int
) -> tuple[list[int], list[int]]:
    """Indices of (training folds, held-out fold) in dataset order."""
    if not 0 <= holdout_fold < assignment.k:
        raise InvalidFoldCount(
            f"holdout fold {holdout_fold} outside [0, {assignment.k})"
        )
    train, test = [], []
    for i, tile in enumerate(dataset.tiles):
        if assignment.fold_of_sample[tile.sample_id] == holdout_fold:
            test.append(i)
        else:
            train.append(i)
    return train, test
