"""Core dataset containers.

An ImageTile is the unit flowing through both phases: a (H, W, 3) float
array normalized to [-1, 1], its ground sample distance in meters, a class
id and a unique sample id. Datasets are immutable after construction and
safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ShapeMismatch

_RANGE_TOL = 1e-6


@dataclass(frozen=True)
class ImageTile:
    pixels: np.ndarray
    gsd_meters: float
    class_id: int
    sample_id: str

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3:
            raise ShapeMismatch(f"pixels must be (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeMismatch("empty image")
        if px.min() < -1.0 - _RANGE_TOL or px.max() > 1.0 + _RANGE_TOL:
            raise ValueError(
                f"pixel values outside [-1, 1]: [{px.min():.4f}, {px.max():.4f}]"
            )
        if self.gsd_meters <= 0:
            raise ValueError(f"gsd_meters must be positive, got {self.gsd_meters}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def with_pixels(self, pixels: np.ndarray) -> "ImageTile":
        return replace(self, pixels=pixels)


@dataclass(frozen=True)
class LabeledDataset:
    """All tiles of one classification dataset plus the declared class order."""

    tiles: tuple[ImageTile, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        k = len(self.class_names)
        for t in self.tiles:
            if t.class_id >= k:
                raise ValueError(
                    f"tile {t.sample_id} has class_id {t.class_id} >= K={k}"
                )
        ids = [t.sample_id for t in self.tiles]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sample_id in dataset")

    def __len__(self) -> int:
        return len(self.tiles)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def counts(self) -> list[int]:
        out = [0] * self.num_classes
        for t in self.tiles:
            out[t.class_id] += 1
        return out

    def indices_by_class(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_classes)]
        for i, t in enumerate(self.tiles):
            out[t.class_id].append(i)
        return out

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(
            tiles=tuple(self.tiles[i] for i in indices),
            class_names=self.class_names,
        )


@dataclass(frozen=True)
class PairedDataset:
    """Super-resolution pairs: x is the interpolation-upscaled LR image,
    y0 the HR target; both share the HR pixel grid."""

    pairs: tuple[tuple[ImageTile, ImageTile], ...]
    scale_factor: int
    lr_tiles: tuple[ImageTile, ...] = field(default=())

    def __post_init__(self):
        for x, y0 in self.pairs:
            if x.pixels.shape != y0.pixels.shape:
                raise ShapeMismatch(
                    f"pair {y0.sample_id}: x {x.pixels.shape} != y0 {y0.pixels.shape}"
                )
        if self.lr_tiles:
            if len(self.lr_tiles) != len(self.pairs):
                raise ShapeMismatch("lr_tiles length differs from pairs")
            for lr, (_, y0) in zip(self.lr_tiles, self.pairs):
                if lr.height * self.scale_factor != y0.height:
                    raise ShapeMismatch(
                        f"pair {y0.sample_id}: scale_factor x LR side != HR side"
                    )

    def __len__(self) -> int:
        return len(self.pairs)
