"""Dataset persistence.

Directory layout: ``root/<class_name>/<sample_id>.png`` (8-bit RGB), with
a ``manifest.csv`` whose header is ``sample_id,path,class,lon,lat``. The
manifest may start with a ``# classes: a,b,c`` line declaring the class
order; without it, class ids follow the order of first appearance. Paired
archives keep two trees, ``hr/`` and ``lr/``, sharing one manifest whose
paths point into ``hr/``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import MissingData, UnknownClass
from ..imageops import from_uint8, to_uint8
from .resize import upscale_lr
from .tiles import ImageTile, LabeledDataset, PairedDataset

MANIFEST_HEADER = ["sample_id", "path", "class", "lon", "lat"]
CLASSES_PREFIX = "# classes:"


def save_tile_png(pixels: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(pixels), mode="RGB").save(path, format="PNG")


def load_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        raw = np.asarray(img.convert("RGB"))
    return from_uint8(raw)


def _read_manifest(manifest: Path) -> tuple[list[str] | None, list[dict[str, str]]]:
    if not manifest.is_file():
        raise MissingData(f"manifest not found: {manifest}")
    declared: list[str] | None = None
    with manifest.open(newline="", encoding="utf-8") as f:
        first = f.readline()
        if first.startswith(CLASSES_PREFIX):
            declared = [c.strip() for c in first[len(CLASSES_PREFIX):].strip().split(",") if c.strip()]
        else:
            f.seek(0)
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != MANIFEST_HEADER:
            raise MissingData(
                f"manifest header must be {','.join(MANIFEST_HEADER)}, "
                f"got {reader.fieldnames}"
            )
        rows = list(reader)
    if not rows:
        raise MissingData(f"manifest has no data rows: {manifest}")
    return declared, rows


def load_dataset(root: Path, manifest: Path, gsd_meters: float = 1.0) -> LabeledDataset:
    """Load all tiles referenced by the manifest.

    Class ids follow the declared class order (``# classes:`` line) or,
    absent that, the order of first appearance in the manifest. The
    manifest schema carries no ground sample distance, so callers supply
    one for the whole dataset.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingData(f"dataset root does not exist: {root}")
    declared, rows = _read_manifest(Path(manifest))
    if declared is not None:
        class_names = list(declared)
    else:
        class_names = []
        for row in rows:
            if row["class"] not in class_names:
                class_names.append(row["class"])
    index = {name: i for i, name in enumerate(class_names)}
    tiles = []
    for row in rows:
        cname = row["class"]
        if cname not in index:
            raise UnknownClass(
                f"manifest row {row['sample_id']!r} uses undeclared class {cname!r}"
            )
        path = root / row["path"]
        if not path.is_file():
            raise MissingData(f"missing image file: {path}")
        tiles.append(
            ImageTile(load_png(path), gsd_meters, index[cname], row["sample_id"])
        )
    return LabeledDataset(tiles=tuple(tiles), class_names=tuple(class_names))


def _write_manifest(path: Path, labeled: LabeledDataset, rel_paths: list[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write(f"{CLASSES_PREFIX} {','.join(labeled.class_names)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for tile, rel in zip(labeled.tiles, rel_paths):
            writer.writerow(
                [tile.sample_id, rel, labeled.class_names[tile.class_id], "", ""]
            )


def write_paired_archive(
    paired: PairedDataset, labeled: LabeledDataset, out_dir: Path
) -> Path:
    """Write hr/ and lr/ trees plus the manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    rel_paths = []
    for lr, hr in zip(paired.lr_tiles, labeled.tiles):
        cname = labeled.class_names[hr.class_id]
        rel = f"hr/{cname}/{hr.sample_id}.png"
        save_tile_png(hr.pixels, out_dir / rel)
        save_tile_png(lr.pixels, out_dir / "lr" / cname / f"{lr.sample_id}.png")
        rel_paths.append(rel)
    manifest = out_dir / "manifest.csv"
    _write_manifest(manifest, labeled, rel_paths)
    return manifest


def write_labeled_archive(labeled: LabeledDataset, out_dir: Path,
                          subdir: str = "hr") -> Path:
    """Write a single image tree plus manifest (no LR counterpart)."""
    out_dir = Path(out_dir)
    rel_paths = []
    for tile in labeled.tiles:
        cname = labeled.class_names[tile.class_id]
        rel = f"{subdir}/{cname}/{tile.sample_id}.png"
        save_tile_png(tile.pixels, out_dir / rel)
        rel_paths.append(rel)
    manifest = out_dir / "manifest.csv"
    _write_manifest(manifest, labeled, rel_paths)
    return manifest


def load_paired_archive(
    root: Path, gsd_hr: float = 1.2, upscale_method: str = "bicubic"
) -> tuple[PairedDataset, LabeledDataset]:
    """Load a paired archive written by write_paired_archive.

    Rebuilds the conditioning images x by interpolating the stored LR tiles
    up to the HR grid.
    """
    root = Path(root)
    labeled = load_dataset(root, root / "manifest.csv", gsd_meters=gsd_hr)
    pairs = []
    lr_tiles = []
    factor = None
    for hr in labeled.tiles:
        cname = labeled.class_names[hr.class_id]
        lr_path = root / "lr" / cname / f"{hr.sample_id}.png"
        if not lr_path.is_file():
            raise MissingData(f"missing LR image: {lr_path}")
        lr_px = load_png(lr_path)
        if factor is None:
            if hr.height % lr_px.shape[0]:
                raise MissingData("HR size not an integer multiple of LR size")
            factor = hr.height // lr_px.shape[0]
        lr = ImageTile(lr_px, gsd_hr * factor, hr.class_id, hr.sample_id)
        x = upscale_lr(lr, factor, upscale_method)
        lr_tiles.append(lr)
        pairs.append((x, hr))
    return (
        PairedDataset(pairs=tuple(pairs), scale_factor=factor, lr_tiles=tuple(lr_tiles)),
        labeled,
    )
