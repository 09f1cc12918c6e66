"""Input-domain alignment between training and inference conditioning images.

When the images to be super-resolved come from a different source than the
training pairs, their channel statistics drift; the correction matches the
inference batch's per-channel moments to the training domain before the
conditioning images enter the denoiser.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateStats

EPS_STD = 1e-6


@dataclass(frozen=True)
class DomainStats:
    mean: np.ndarray  # (C,)
    std: np.ndarray  # (C,)

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DegenerateStats("mean/std must be matching 1-D arrays")
        if np.any(self.std <= EPS_STD):
            raise DegenerateStats(f"channel std at or below {EPS_STD}")


def compute_domain_stats(batch: np.ndarray) -> DomainStats:
    """Per-channel mean and std over a (N, H, W, C) batch."""
    if batch.ndim != 4:
        raise DegenerateStats(f"expected (N, H, W, C), got shape {batch.shape}")
    mean = batch.mean(axis=(0, 1, 2))
    std = batch.std(axis=(0, 1, 2))
    return DomainStats(mean=mean, std=std)


def correct_deviation(x_infer: np.ndarray, train_stats: DomainStats) -> np.ndarray:
    """Affinely align a (N, H, W, C) inference batch to the training domain:
    x' = (x - mean_infer) / std_infer * std_train + mean_train.

    Identity when the statistics already match; applying it twice equals
    applying it once. Raises DegenerateStats for a constant-valued channel.
    """
    if x_infer.ndim != 4:
        raise DegenerateStats(f"expected (N, H, W, C), got shape {x_infer.shape}")
    mean_i = x_infer.mean(axis=(0, 1, 2))
    std_i = x_infer.std(axis=(0, 1, 2))
    if np.any(std_i < EPS_STD):
        raise DegenerateStats(
            f"inference batch channel std below {EPS_STD}; cannot align"
        )
    return (x_infer - mean_i) / std_i * train_stats.std + train_stats.mean
