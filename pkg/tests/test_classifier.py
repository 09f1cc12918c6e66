from __future__ import annotations

from itertools import islice

import numpy as np
import pytest
import torch

from finebuild.cibm import build_teacher
from finebuild.classifier import (
    TeacherTarget,
    TrainConfig,
    build_classifier,
    load_classifier,
    predict,
    predict_batch,
    teacher_targets,
    train_classifier,
)
from finebuild.classifier.train import _make_sampler, lr_at_epoch
from finebuild.data import AugmentPolicy
from finebuild.data.tiles import LabeledDataset
from finebuild.errors import ConfigMismatch, InputSizeMismatch

from conftest import random_tile


def _dataset(counts, size=16, seed=0):
    rng = np.random.default_rng(seed)
    tiles = []
    for cid, n in enumerate(counts):
        for j in range(n):
            tiles.append(random_tile(rng, size, cid, f"c{cid}_{j}"))
    return LabeledDataset(
        tiles=tuple(tiles), class_names=tuple(f"k{c}" for c in range(len(counts)))
    )


def _quick_config(**kw):
    base = dict(
        alpha=0.0,
        epochs=2,
        lr_start=1e-2,
        lr_end=1e-4,
        batch_size=8,
        seed=3,
        augmentation=AugmentPolicy(hflip_prob=0.5, crop_size=0),
        sampler="uniform",
        width=8,
        teacher_classes=4,
    )
    base.update(kw)
    return TrainConfig(**base)


# --- network -----------------------------------------------------------------

def test_dual_head_output_shapes():
    model = build_classifier(num_classes=5, teacher_classes=9, width=8, seed=0)
    x = torch.randn(3, 3, 16, 16)
    task, distill = model(x)
    assert task.shape == (3, 5)
    assert distill.shape == (3, 9)


def test_dual_head_softmax_normalized():
    model = build_classifier(num_classes=5, teacher_classes=9, width=8, seed=1)
    model.eval()
    x = torch.randn(4, 3, 16, 16)
    task, distill = model(x)
    assert torch.allclose(torch.softmax(task, 1).sum(1), torch.ones(4), atol=1e-6)
    assert torch.allclose(torch.softmax(distill, 1).sum(1), torch.ones(4), atol=1e-6)


def test_build_classifier_deterministic():
    a = build_classifier(4, 6, width=8, seed=9)
    b = build_classifier(4, 6, width=8, seed=9)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


# --- lr schedule ----------------------------------------------------------------

def test_lr_step_down_schedule():
    cfg = _quick_config(epochs=50, lr_start=1.5e-2, lr_end=1e-5)
    assert lr_at_epoch(cfg, 0) == pytest.approx(1.5e-2)
    assert lr_at_epoch(cfg, 19) == pytest.approx(1.5e-2)
    assert lr_at_epoch(cfg, 20) == pytest.approx(1.5e-3)
    assert lr_at_epoch(cfg, 35) == pytest.approx(1.5e-4)
    assert lr_at_epoch(cfg, 45) == pytest.approx(1.5e-5)
    assert lr_at_epoch(cfg, 49) == pytest.approx(1.5e-5)


def test_lr_clipped_at_floor():
    cfg = _quick_config(epochs=10, lr_start=1e-3, lr_end=5e-4)
    assert lr_at_epoch(cfg, 9) == 5e-4


# --- teacher targets -------------------------------------------------------------

def test_teacher_targets_deterministic(tmp_path):
    ds = _dataset([4, 4])
    teacher = build_teacher(seed=2, input_size=16, width=8, num_classes=6)
    t1 = teacher_targets(ds, teacher, cache_dir=tmp_path / "cache")
    t2 = teacher_targets(ds, teacher, cache_dir=tmp_path / "cache")
    assert [t.c for t in t1] == [t.c for t in t2]
    assert all(0 <= t.c < 6 for t in t1)
    files = sorted(p.name for p in (tmp_path / "cache").iterdir())
    assert len(files) == 1 and files[0].startswith("targets_")


def test_teacher_targets_cache_hit_identical(tmp_path):
    ds = _dataset([3, 3])
    teacher = build_teacher(seed=2, input_size=16, width=8, num_classes=6)
    cache = tmp_path / "cache"
    t1 = teacher_targets(ds, teacher, cache_dir=cache)
    payload = next(cache.iterdir()).read_bytes()
    t2 = teacher_targets(ds, teacher, cache_dir=cache)
    assert payload == next(cache.iterdir()).read_bytes()
    assert [t.c for t in t1] == [t.c for t in t2]


def test_teacher_targets_argmax_tie_lowest_index():
    class TieTeacher:
        input_size = 16
        teacher_id = "tie"

        def logits(self, batch):
            return np.tile(np.array([[2.0, 2.0, 1.0]]), (batch.shape[0], 1))

    ds = _dataset([2])
    targets = teacher_targets(ds, TieTeacher(), cache_dir=None)
    assert all(t.c == 0 for t in targets)


def test_teacher_targets_soft_distributions(tmp_path):
    ds = _dataset([3])
    teacher = build_teacher(seed=4, input_size=16, width=8, num_classes=5)
    targets = teacher_targets(ds, teacher, soft=True, cache_dir=tmp_path / "c")
    for t in targets:
        assert t.soft is not None
        assert t.soft.sum() == pytest.approx(1.0, abs=1e-6)
        assert int(np.argmax(t.soft)) == t.c


def test_teacher_targets_env_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("UBFINE_CACHE", str(tmp_path / "envcache"))
    ds = _dataset([2])
    teacher = build_teacher(seed=5, input_size=16, width=8, num_classes=4)
    teacher_targets(ds, teacher)
    assert any((tmp_path / "envcache").iterdir())


# --- training ---------------------------------------------------------------------

def test_train_classifier_runs_and_logs(tmp_path):
    ds = _dataset([10, 10, 10])
    cfg = _quick_config()
    model, log = train_classifier(
        cfg, ds, list(range(len(ds))), out_dir=tmp_path / "ckpt"
    )
    assert len(log) == cfg.epochs
    for row in log:
        assert set(row) == {"epoch", "lr", "loss", "l_con", "l_cls", "train_top1"}
        assert np.isfinite(row["loss"])
    assert (tmp_path / "ckpt" / "metadata.json").is_file()
    assert (tmp_path / "ckpt" / "weights.pt").is_file()
    header = (tmp_path / "ckpt" / "train_log.csv").read_text().splitlines()[0]
    assert header == "epoch,lr,loss,l_con,l_cls,train_top1"


def test_train_alpha_zero_loss_equals_cls(tmp_path):
    ds = _dataset([8, 8])
    cfg = _quick_config(alpha=0.0, epochs=1)
    _, log = train_classifier(cfg, ds, list(range(len(ds))))
    assert log[0]["loss"] == log[0]["l_cls"]
    assert log[0]["l_con"] == 0.0


def test_train_deterministic_under_seed():
    ds = _dataset([8, 8])
    cfg = _quick_config(epochs=2, seed=21)
    _, log1 = train_classifier(cfg, ds, list(range(len(ds))))
    _, log2 = train_classifier(cfg, ds, list(range(len(ds))))
    assert [r["loss"] for r in log1] == [r["loss"] for r in log2]
    assert [r["train_top1"] for r in log1] == [r["train_top1"] for r in log2]


def test_train_with_distillation(tmp_path):
    ds = _dataset([8, 8])
    teacher = build_teacher(seed=6, input_size=16, width=8, num_classes=4)
    targets = teacher_targets(ds, teacher, cache_dir=None)
    cfg = _quick_config(alpha=0.7, epochs=1, teacher_classes=4)
    _, log = train_classifier(cfg, ds, list(range(len(ds))), targets=targets)
    assert log[0]["l_con"] > 0.0
    # float32 training: the mix identity holds to single precision
    assert log[0]["loss"] == pytest.approx(
        0.7 * log[0]["l_con"] + 0.3 * log[0]["l_cls"], abs=1e-6
    )


def test_train_requires_targets_when_alpha_positive():
    ds = _dataset([6, 6])
    with pytest.raises(ConfigMismatch):
        train_classifier(_quick_config(alpha=0.5), ds, list(range(len(ds))))


def test_train_rejects_wrong_k():
    ds = _dataset([6, 6])
    with pytest.raises(ConfigMismatch):
        train_classifier(_quick_config(), ds, list(range(len(ds))), num_classes=5)


def test_cibm_sampler_frequencies_in_trainer():
    # the sampler assembled by the trainer draws classes at the table weights
    from finebuild.cibm.weights import CategoryWeightTable

    ds = _dataset([30, 10])
    table = CategoryWeightTable(
        counts=np.array([30, 10]),
        p=np.array([0.75, 0.25]),
        spreads=np.array([1.0, 1.0]),
        weights=np.array([0.25, 0.75]),
    )
    cfg = _quick_config(sampler="cibm")
    stream = _make_sampler(
        cfg, ds, list(range(len(ds))), table, np.random.default_rng(0)
    )
    draws = np.fromiter(islice(stream, 20_000), dtype=np.int64)
    frac_minority = np.mean(draws >= 30)
    assert abs(frac_minority - 0.75) < 0.02


def test_checkpoint_round_trip(tmp_path):
    ds = _dataset([8, 8])
    cfg = _quick_config(epochs=1)
    model, _ = train_classifier(cfg, ds, list(range(len(ds))), out_dir=tmp_path / "ck")
    loaded, meta = load_classifier(tmp_path / "ck")
    assert meta["num_classes"] == 2
    x = torch.randn(2, 3, 16, 16)
    with torch.no_grad():
        a, _ = model(x)
        b, _ = loaded(x)
    assert torch.allclose(a, b)


# --- predict ----------------------------------------------------------------------

def test_predict_ranked_and_normalized():
    ds = _dataset([8, 8])
    cfg = _quick_config(epochs=1)
    model, _ = train_classifier(cfg, ds, list(range(len(ds))))
    ranked = predict(model, ds.tiles[0])
    probs = [p for _, p in ranked]
    assert probs == sorted(probs, reverse=True)
    assert sum(probs) == pytest.approx(1.0, abs=1e-6)
    assert len(ranked) == 2


def test_predict_rank1_is_argmax():
    ds = _dataset([8, 8])
    model, _ = train_classifier(_quick_config(epochs=1), ds, list(range(len(ds))))
    tile = ds.tiles[3]
    with torch.no_grad():
        logits, _ = model(
            torch.from_numpy(
                np.transpose(tile.pixels, (2, 0, 1))[None].astype(np.float32)
            )
        )
    assert predict(model, tile)[0][0] == int(logits.argmax())


def test_predict_single_matches_batch_row():
    ds = _dataset([8, 8])
    model, _ = train_classifier(_quick_config(epochs=1), ds, list(range(len(ds))))
    tiles = list(ds.tiles[:4])
    batch = predict_batch(model, tiles)
    for i, tile in enumerate(tiles):
        single = predict(model, tile)
        for (c1, p1), (c2, p2) in zip(single, batch[i]):
            assert c1 == c2
            assert p1 == pytest.approx(p2, abs=1e-6)


def test_predict_input_size_mismatch():
    ds = _dataset([8, 8])
    model, _ = train_classifier(_quick_config(epochs=1), ds, list(range(len(ds))))
    wrong = random_tile(np.random.default_rng(0), size=24, class_id=0)
    with pytest.raises(InputSizeMismatch):
        predict(model, wrong)
