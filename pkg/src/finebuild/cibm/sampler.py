"""Reproducible class-weighted sampling."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from ..errors import DegenerateWeights


def weighted_sampler(
    weights,
    per_class_indices: Sequence[Sequence[int]],
    rng: np.random.Generator,
) -> Iterator[int]:
    """Infinite stream of dataset indices.

    Each draw picks a class with probability W_c, then a uniformly random
    member of that class. The stream is deterministic under a seeded rng;
    create one sampler per consumer, the generator owns its rng.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0):
        raise DegenerateWeights(f"negative weight in {w}")
    if abs(w.sum() - 1.0) > 1e-9:
        raise DegenerateWeights(f"weights must sum to 1, got {w.sum()!r}")
    if len(per_class_indices) != w.size:
        raise DegenerateWeights("one index list per class required")
    for c, members in enumerate(per_class_indices):
        if w[c] > 0 and len(members) == 0:
            raise DegenerateWeights(f"class {c} has positive weight but no samples")
    members = [np.asarray(m, dtype=np.int64) for m in per_class_indices]
    cum = np.cumsum(w)
    cum[-1] = 1.0

    def stream() -> Iterator[int]:
        while True:
            c = int(np.searchsorted(cum, rng.random(), side="right"))
            pool = members[c]
            yield int(pool[rng.integers(len(pool))])

    return stream()
