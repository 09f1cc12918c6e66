"""Frozen teacher encoder.

Supplies both the embedding used for intra-class distance spreads and the
label-space logits used for distillation targets. The default teacher is a
small convolutional encoder with seeded random weights, frozen at
construction: only determinism matters for the balancing math on synthetic
data, and real runs may load an externally trained checkpoint instead.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import TeacherInputMismatch
from ..hashing import fnv1a64


class FrozenTeacher(nn.Module):
    def __init__(self, input_size: int = 32, width: int = 64, num_classes: int = 16):
        super().__init__()
        self.input_size = input_size
        self.width = width
        self.num_classes = num_classes
        self.features = nn.Sequential(
            nn.Conv2d(3, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(64, width, 3, stride=2, padding=1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
        )
        self.head = nn.Linear(width, num_classes)

    def _check(self, batch: np.ndarray) -> torch.Tensor:
        if batch.ndim != 4 or batch.shape[3] != 3:
            raise TeacherInputMismatch(f"expected (N, H, W, 3), got {batch.shape}")
        if batch.shape[1] != self.input_size or batch.shape[2] != self.input_size:
            raise TeacherInputMismatch(
                f"teacher expects {self.input_size}x{self.input_size} inputs, "
                f"got {batch.shape[1]}x{batch.shape[2]}"
            )
        return torch.from_numpy(
            np.transpose(batch, (0, 3, 1, 2)).astype(np.float32)
        )

    @torch.no_grad()
    def embed(self, batch: np.ndarray) -> np.ndarray:
        """Penultimate-layer embedding, shape (N, width)."""
        t = self._check(batch)
        return self.features(t).flatten(1).numpy()

    @torch.no_grad()
    def logits(self, batch: np.ndarray) -> np.ndarray:
        """Teacher label-space logits, shape (N, num_classes)."""
        t = self._check(batch)
        return self.head(self.features(t).flatten(1)).numpy()

    @property
    def teacher_id(self) -> str:
        ident = getattr(self, "_ident", "unseeded")
        return f"{fnv1a64(ident):016x}"


def build_teacher(
    seed: int = 77,
    input_size: int = 32,
    width: int = 64,
    num_classes: int = 16,
    checkpoint: Path | None = None,
) -> FrozenTeacher:
    """Construct a frozen teacher; seeded random weights by default."""
    torch.manual_seed(seed)
    teacher = FrozenTeacher(input_size=input_size, width=width, num_classes=num_classes)
    if checkpoint is not None:
        state = torch.load(Path(checkpoint), weights_only=True)
        teacher.load_state_dict(state)
        teacher._ident = f"teacher-ckpt;{Path(checkpoint).name};{input_size};{width};{num_classes}"
    else:
        teacher._ident = f"teacher;{seed};{input_size};{width};{num_classes}"
    teacher.eval()
    for p in teacher.parameters():
        p.requires_grad_(False)
    return teacher
