"""Training-time augmentation: horizontal flip and random crop.

Pure given (tile, policy, seed), so batches may be assembled in parallel
without affecting reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CropTooLarge
from .tiles import ImageTile


@dataclass(frozen=True)
class AugmentPolicy:
    hflip_prob: float = 0.5
    crop_size: int = 0  # 0 means keep full size

    def effective_crop(self, height: int, width: int) -> int:
        size = self.crop_size if self.crop_size > 0 else min(height, width)
        if size > height or size > width:
            raise CropTooLarge(f"crop {size} exceeds image {height}x{width}")
        return size


def augment(tile: ImageTile, policy: AugmentPolicy, seed: int) -> ImageTile:
    """Apply the policy with all randomness drawn from ``seed``."""
    size = policy.effective_crop(tile.height, tile.width)
    rng = np.random.default_rng(seed)
    px = tile.pixels
    if rng.random() < policy.hflip_prob:
        px = px[:, ::-1, :]
    top = int(rng.integers(0, tile.height - size + 1))
    left = int(rng.integers(0, tile.width - size + 1))
    px = np.ascontiguousarray(px[top : top + size, left : left + size])
    return tile.with_pixels(px)


def hflip(tile: ImageTile) -> ImageTile:
    """Deterministic horizontal flip (its own involution)."""
    return tile.with_pixels(np.ascontiguousarray(tile.pixels[:, ::-1, :]))
