"""Distillation targets from the frozen teacher.

Targets are precomputed once per (teacher, dataset) and cached on disk so
training never re-runs the teacher; the cache directory defaults to the
UBFINE_CACHE environment variable.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data.tiles import LabeledDataset
from .losses import softmax
from ..cibm.features import resize_for_teacher

CACHE_ENV = "UBFINE_CACHE"


@dataclass(frozen=True)
class TeacherTarget:
    sample_id: str
    c: int  # teacher-predicted class index
    soft: np.ndarray | None = None  # optional distribution over teacher classes


def _dataset_fingerprint(dataset: LabeledDataset) -> str:
    h = hashlib.sha256()
    for tile in dataset.tiles:
        h.update(tile.sample_id.encode("utf-8"))
        h.update(np.int64(tile.class_id).tobytes())
        h.update(np.ascontiguousarray(tile.pixels, dtype=np.float32).tobytes())
    return h.hexdigest()[:16]


def _cache_paths(cache_dir: Path, teacher, dataset) -> tuple[Path, Path]:
    key = f"{teacher.teacher_id}-{_dataset_fingerprint(dataset)}"
    return cache_dir / f"targets_{key}.csv", cache_dir / f"targets_{key}.npz"


def teacher_targets(
    dataset: LabeledDataset,
    teacher,
    *,
    soft: bool = False,
    cache_dir: Path | None = None,
    batch_size: int = 256,
) -> list[TeacherTarget]:
    """Teacher argmax class (ties -> lowest index) for every sample, in
    dataset order; optionally the full softmax distribution as well."""
    if cache_dir is None:
        env = os.environ.get(CACHE_ENV, "")
        cache_dir = Path(env) if env else None
    csv_path = npz_path = None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        csv_path, npz_path = _cache_paths(cache_dir, teacher, dataset)
        if csv_path.is_file() and (not soft or npz_path.is_file()):
            return _load_targets(csv_path, npz_path if soft else None, dataset)

    tiles = resize_for_teacher(list(dataset.tiles), teacher)
    hard: list[int] = []
    soft_rows: list[np.ndarray] = []
    for start in range(0, len(tiles), batch_size):
        batch = np.stack([t.pixels for t in tiles[start : start + batch_size]])
        logits = teacher.logits(batch)
        hard.extend(int(np.argmax(row)) for row in logits)
        if soft:
            soft_rows.extend(softmax(row) for row in logits)

    targets = [
        TeacherTarget(
            sample_id=tile.sample_id,
            c=hard[i],
            soft=soft_rows[i] if soft else None,
        )
        for i, tile in enumerate(dataset.tiles)
    ]
    if csv_path is not None:
        with csv_path.open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["sample_id", "c"])
            for t in targets:
                w.writerow([t.sample_id, t.c])
        if soft:
            np.savez_compressed(npz_path, soft=np.stack(soft_rows))
    return targets


def _load_targets(csv_path: Path, npz_path: Path | None,
                  dataset: LabeledDataset) -> list[TeacherTarget]:
    with csv_path.open(newline="", encoding="utf-8") as f:
        rows = {r["sample_id"]: int(r["c"]) for r in csv.DictReader(f)}
    soft = None
    if npz_path is not None:
        soft = np.load(npz_path)["soft"]
    return [
        TeacherTarget(
            sample_id=t.sample_id,
            c=rows[t.sample_id],
            soft=soft[i] if soft is not None else None,
        )
        for i, t in enumerate(dataset.tiles)
    ]
