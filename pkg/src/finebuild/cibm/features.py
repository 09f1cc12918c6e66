"""Per-class feature extraction with a frozen teacher."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TeacherInputMismatch
from ..imageops import resize_to
from ..data.tiles import ImageTile


@dataclass(frozen=True)
class FeatureMatrix:
    class_id: int
    features: np.ndarray  # (x_i, d)

    def __post_init__(self):
        if self.features.ndim != 2:
            raise TeacherInputMismatch("features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise TeacherInputMismatch("non-finite feature values")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]


def resize_for_teacher(tiles: list[ImageTile], teacher) -> list[ImageTile]:
    """Bicubic-resize tiles to the teacher's native input size."""
    out = []
    for t in tiles:
        if t.height == teacher.input_size and t.width == teacher.input_size:
            out.append(t)
        else:
            out.append(t.with_pixels(resize_to(t.pixels, teacher.input_size)))
    return out


def extract_features(
    images: list[ImageTile], teacher, batch_size: int = 256
) -> FeatureMatrix:
    """Embed one class's images; row j is the teacher feature of image j.

    Images must already match the teacher's input size (use
    resize_for_teacher upstream) and must all carry the same class id.
    """
    if not images:
        raise TeacherInputMismatch("no images given")
    class_ids = {t.class_id for t in images}
    if len(class_ids) != 1:
        raise TeacherInputMismatch(f"mixed class ids in one batch: {sorted(class_ids)}")
    for t in images:
        if t.height != teacher.input_size or t.width != teacher.input_size:
            raise TeacherInputMismatch(
                f"tile {t.sample_id} is {t.height}x{t.width}, teacher expects "
                f"{teacher.input_size}x{teacher.input_size}"
            )
    chunks = []
    for start in range(0, len(images), batch_size):
        batch = np.stack([t.pixels for t in images[start : start + batch_size]])
        chunks.append(teacher.embed(batch))
    return FeatureMatrix(class_id=images[0].class_id, features=np.concatenate(chunks))
