from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finebuild.data import (
    AugmentPolicy,
    SynthConfig,
    augment,
    default_class_specs,
    load_dataset,
    load_paired_archive,
    make_splits,
    synth_generate,
    upscale_lr,
    write_paired_archive,
)
from finebuild.data.augment import hflip
from finebuild.data.splits import split_indices
from finebuild.data.tiles import ImageTile, LabeledDataset
from finebuild.errors import (
    CropTooLarge,
    InvalidConfig,
    InvalidFactor,
    InvalidFoldCount,
    MissingData,
    UnknownClass,
)
from finebuild.imageops import area_downsample

from conftest import random_tile


def _labeled(counts, size=8, seed=0):
    rng = np.random.default_rng(seed)
    tiles = []
    for cid, n in enumerate(counts):
        for j in range(n):
            tiles.append(random_tile(rng, size, cid, f"c{cid}_{j}"))
    return LabeledDataset(tiles=tuple(tiles), class_names=tuple(f"class{c}" for c in range(len(counts))))


# --- splits ------------------------------------------------------------------

def test_make_splits_exact_division():
    ds = _labeled([10])
    split = make_splits(ds, 5, seed=0)
    sizes = [len(split.fold_sample_ids(f)) for f in range(5)]
    assert sizes == [2, 2, 2, 2, 2]


def test_make_splits_stratified_and_partition():
    ds = _labeled([11, 7, 5])
    split = make_splits(ds, 5, seed=3)
    assert set(split.fold_of_sample) == {t.sample_id for t in ds.tiles}
    for cid in range(3):
        per_fold = [0] * 5
        for t in ds.tiles:
            if t.class_id == cid:
                per_fold[split.fold_of_sample[t.sample_id]] += 1
        assert max(per_fold) - min(per_fold) <= 1


def test_make_splits_deterministic():
    ds = _labeled([9, 9])
    a = make_splits(ds, 3, seed=42)
    b = make_splits(ds, 3, seed=42)
    assert a.fold_of_sample == b.fold_of_sample


def test_make_splits_train_ratio():
    ds = _labeled([10, 10])
    split = make_splits(ds, 5, seed=1)
    train, test = split_indices(ds, split, holdout_fold=0)
    assert len(train) == 16 and len(test) == 4


def test_make_splits_rejects_k1():
    with pytest.raises(InvalidFoldCount):
        make_splits(_labeled([10]), 1, seed=0)


def test_make_splits_rejects_small_class():
    with pytest.raises(InvalidFoldCount):
        make_splits(_labeled([10, 3]), 5, seed=0)


# --- upscale -----------------------------------------------------------------

def test_upscale_shape_and_gsd():
    tile = random_tile(np.random.default_rng(0), size=32)
    tile = ImageTile(tile.pixels, 4.78, 0, "s")
    up = upscale_lr(tile, 4, "bicubic")
    assert up.pixels.shape == (128, 128, 3)
    assert up.gsd_meters == pytest.approx(4.78 / 4)


def test_upscale_factor_one_identity():
    tile = random_tile(np.random.default_rng(1))
    up = upscale_lr(tile, 1)
    assert np.array_equal(up.pixels, tile.pixels)


def test_upscale_constant_stays_constant():
    px = np.full((8, 8, 3), 0.25, dtype=np.float32)
    tile = ImageTile(px, 1.0, 0, "c")
    for method in ("bicubic", "bilinear"):
        up = upscale_lr(tile, 3, method)
        assert np.allclose(up.pixels, 0.25, atol=1e-6)


def test_upscale_rejects_bad_factor():
    with pytest.raises(InvalidFactor):
        upscale_lr(random_tile(np.random.default_rng(2)), 0)


@given(factor=st.integers(min_value=1, max_value=5), size=st.integers(min_value=4, max_value=12))
@settings(max_examples=20, deadline=None)
def test_upscale_multiplies_both_sides(factor, size):
    tile = random_tile(np.random.default_rng(9), size=size)
    up = upscale_lr(tile, factor)
    assert up.pixels.shape == (size * factor, size * factor, 3)
    assert -1.0 <= up.pixels.min() and up.pixels.max() <= 1.0


# --- synth -------------------------------------------------------------------

def test_synth_exact_counts():
    cfg = SynthConfig(
        class_specs=default_class_specs(),
        counts=(5, 5, 5, 5, 5, 2),
        image_size=32,
        scale_factor=4,
        seed=0,
    )
    paired, labeled = synth_generate(cfg)
    assert len(labeled) == 27
    assert labeled.counts() == [5, 5, 5, 5, 5, 2]


def test_synth_lr_is_exact_area_mean(tiny_synth):
    paired, labeled = tiny_synth
    for lr, hr in zip(paired.lr_tiles[:6], labeled.tiles[:6]):
        assert np.array_equal(area_downsample(hr.pixels, paired.scale_factor), lr.pixels)


def test_synth_deterministic():
    cfg = SynthConfig(
        class_specs=default_class_specs(["rect", "twin"]),
        counts=(4, 4),
        seed=123,
    )
    p1, l1 = synth_generate(cfg)
    p2, l2 = synth_generate(cfg)
    for a, b in zip(l1.tiles, l2.tiles):
        assert np.array_equal(a.pixels, b.pixels)


def test_synth_rejects_zero_count():
    with pytest.raises(InvalidConfig):
        SynthConfig(
            class_specs=default_class_specs(["rect", "twin"]),
            counts=(4, 0),
        )


def test_synth_rejects_single_class():
    with pytest.raises(InvalidConfig):
        SynthConfig(class_specs=default_class_specs(["rect"]), counts=(4,))


# --- augment -----------------------------------------------------------------

def test_hflip_involution():
    tile = random_tile(np.random.default_rng(5))
    assert np.array_equal(hflip(hflip(tile)).pixels, tile.pixels)


def test_augment_crop_size():
    tile = random_tile(np.random.default_rng(6), size=128)
    out = augment(tile, AugmentPolicy(hflip_prob=0.0, crop_size=112), seed=3)
    assert out.pixels.shape == (112, 112, 3)
    assert out.class_id == tile.class_id


def test_augment_deterministic():
    tile = random_tile(np.random.default_rng(7), size=32)
    policy = AugmentPolicy(hflip_prob=0.5, crop_size=24)
    a = augment(tile, policy, seed=99)
    b = augment(tile, policy, seed=99)
    assert np.array_equal(a.pixels, b.pixels)


def test_augment_identity_policy():
    tile = random_tile(np.random.default_rng(8), size=16)
    out = augment(tile, AugmentPolicy(hflip_prob=0.0, crop_size=16), seed=1)
    assert np.array_equal(out.pixels, tile.pixels)


def test_augment_rejects_oversize_crop():
    tile = random_tile(np.random.default_rng(9), size=16)
    with pytest.raises(CropTooLarge):
        augment(tile, AugmentPolicy(crop_size=32), seed=0)


# --- archives and manifests --------------------------------------------------

def test_archive_round_trip(tmp_path, tiny_synth):
    paired, labeled = tiny_synth
    write_paired_archive(paired, labeled, tmp_path / "arch")
    loaded_paired, loaded = load_paired_archive(tmp_path / "arch")
    assert loaded.class_names == labeled.class_names
    assert len(loaded) == len(labeled)
    assert loaded_paired.scale_factor == paired.scale_factor
    # 8-bit quantization bounds the round-trip error
    for a, b in zip(loaded.tiles, labeled.tiles):
        assert np.max(np.abs(a.pixels - b.pixels)) <= (1.0 / 255.0) + 1e-6


def test_load_dataset_missing_root(tmp_path):
    with pytest.raises(MissingData):
        load_dataset(tmp_path / "nope", tmp_path / "nope" / "manifest.csv")


def test_load_dataset_empty_manifest(tmp_path):
    root = tmp_path / "root"
    root.mkdir()
    manifest = root / "manifest.csv"
    manifest.write_text("sample_id,path,class,lon,lat\n", encoding="utf-8")
    with pytest.raises(MissingData):
        load_dataset(root, manifest)


def test_load_dataset_unknown_class(tmp_path, tiny_synth):
    paired, labeled = tiny_synth
    write_paired_archive(paired, labeled, tmp_path / "arch")
    manifest = tmp_path / "arch" / "manifest.csv"
    lines = manifest.read_text(encoding="utf-8").splitlines()
    first_row = lines[2].split(",")
    first_row[2] = "Castle"
    lines[2] = ",".join(first_row)
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(UnknownClass):
        load_dataset(tmp_path / "arch", manifest)


def test_load_dataset_missing_file(tmp_path, tiny_synth):
    paired, labeled = tiny_synth
    write_paired_archive(paired, labeled, tmp_path / "arch")
    victim = next((tmp_path / "arch" / "hr").rglob("*.png"))
    victim.unlink()
    with pytest.raises(MissingData):
        load_dataset(tmp_path / "arch", tmp_path / "arch" / "manifest.csv")


def test_manifest_class_order_matches_declaration(tmp_path, tiny_synth):
    paired, labeled = tiny_synth
    write_paired_archive(paired, labeled, tmp_path / "arch")
    loaded = load_dataset(tmp_path / "arch", tmp_path / "arch" / "manifest.csv")
    assert loaded.class_names == labeled.class_names
    for tile, orig in zip(loaded.tiles, labeled.tiles):
        assert tile.class_id == orig.class_id
