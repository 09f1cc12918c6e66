from __future__ import annotations

import numpy as np
import pytest
import torch

from finebuild.data import SynthConfig, default_class_specs, synth_generate
from finebuild.data.tiles import ImageTile

torch.set_num_threads(max(1, torch.get_num_threads()))


@pytest.fixture(scope="session")
def tiny_synth():
    """Small 3-class paired dataset reused across tests."""
    cfg = SynthConfig(
        class_specs=default_class_specs(["rect", "bigrect", "lshape"]),
        counts=(12, 12, 12),
        image_size=32,
        scale_factor=4,
        seed=11,
    )
    return synth_generate(cfg)


def random_tile(rng: np.random.Generator, size: int = 16, class_id: int = 0,
                sample_id: str = "t0") -> ImageTile:
    px = rng.uniform(-1.0, 1.0, size=(size, size, 3)).astype(np.float32)
    return ImageTile(px, 1.0, class_id, sample_id)
