from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from finebuild.errors import ConfigError
from finebuild.orchestration import load_config, save_config
from finebuild.orchestration.cli import main
from finebuild.orchestration.pipelines import (
    _pct_delta,
    cmd_ablate,
    cmd_cibm_weights,
    cmd_eval,
    cmd_report,
    cmd_super_resolve,
    cmd_synth,
    cmd_train_cls,
    cmd_train_sr,
)


def micro_overrides(root: Path, out: Path) -> dict:
    """Tiny-but-complete pipeline settings used across these tests."""
    return {
        ("run", "out"): str(out),
        ("run", "seed"): "5",
        ("data", "root"): str(root),
        ("data", "classes"): "rect,bigrect,lshape",
        ("data", "counts"): "12,12,6",
        ("data", "hr_size"): "16",
        ("data", "scale_factor"): "4",
        ("data", "folds"): "3",
        ("sr", "t_steps"): "5",
        ("sr", "beta_start"): "0.01",
        ("sr", "beta_end"): "0.3",
        ("sr", "steps"): "12",
        ("sr", "batch"): "8",
        ("sr", "width"): "8",
        ("sr", "infer_batch"): "16",
        ("sr", "log_every"): "5",
        ("cibm", "teacher_input"): "16",
        ("cibm", "teacher_dim"): "8",
        ("cibm", "teacher_classes"): "5",
        ("classifier", "epochs"): "1",
        ("classifier", "batch"): "16",
        ("classifier", "width"): "8",
        ("classifier", "lr_start"): "1e-2",
        ("classifier", "lr_end"): "1e-4",
    }


@pytest.fixture(scope="module")
def micro_archive(tmp_path_factory):
    out = tmp_path_factory.mktemp("arch") / "run"
    cfg = load_config(None, micro_overrides(out, out))
    return cmd_synth(cfg)  # archive lands at out/<name>/


# --- config --------------------------------------------------------------------

def test_config_defaults_complete():
    cfg = load_config(None, {})
    assert cfg["classifier"]["alpha"] == 0.7
    assert cfg["classifier"]["epochs"] == 50
    assert cfg["classifier"]["lr_start"] == 1.5e-2
    assert cfg["classifier"]["lr_end"] == 1e-5
    assert cfg["sr"]["a"] == 2


def test_config_file_and_flag_precedence(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\nseed = 9\n\n[classifier]\nalpha = 0.5\n", encoding="utf-8")
    cfg = load_config(path, {("classifier", "alpha"): "0.25"})
    assert cfg["run"]["seed"] == 9
    assert cfg["classifier"]["alpha"] == 0.25


def test_config_unknown_key_line_number(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[run]\nseed = 1\nbanana = 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=r"bad\.ini:3"):
        load_config(path)


def test_config_unknown_section(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[nope]\nx = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path)


def test_config_type_error():
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(None, {("run", "seed"): "not-an-int"})


def test_config_enum_validation():
    with pytest.raises(ConfigError, match="sampler"):
        load_config(None, {("cibm", "sampler"): "magic"})


def test_config_echo_round_trip(tmp_path):
    cfg = load_config(None, {("run", "seed"): "17", ("sr", "beta_end"): "0.05"})
    save_config(cfg, tmp_path / "echo.ini")
    cfg2 = load_config(tmp_path / "echo.ini")
    assert cfg2 == cfg


# --- synth ----------------------------------------------------------------------

def test_cmd_synth_outputs(micro_archive):
    assert micro_archive.name == "synth"
    assert (micro_archive / "manifest.csv").is_file()
    assert (micro_archive.parent / "run_manifest.json").is_file()
    assert (micro_archive.parent / "config_echo.ini").is_file()
    hr_files = list((micro_archive / "hr").rglob("*.png"))
    lr_files = list((micro_archive / "lr").rglob("*.png"))
    assert len(hr_files) == 30 and len(lr_files) == 30


def test_cmd_synth_manifest_hashes_deterministic(tmp_path, micro_archive):
    out2 = tmp_path / "again"
    cfg = load_config(None, micro_overrides(out2, out2))
    cmd_synth(cfg)
    m1 = json.loads((micro_archive.parent / "run_manifest.json").read_text())
    m2 = json.loads((out2 / "run_manifest.json").read_text())
    # the echo embeds run.out, which legitimately differs between the runs
    m1["files"].pop("config_echo.ini")
    m2["files"].pop("config_echo.ini")
    assert m1["files"] == m2["files"]


def test_overwrite_false_refuses_nonempty(micro_archive):
    cfg = load_config(
        None, micro_overrides(micro_archive, micro_archive.parent)
    )
    with pytest.raises(ConfigError, match="not empty"):
        cmd_synth(cfg)


# --- sr pipelines -----------------------------------------------------------------

@pytest.fixture(scope="module")
def micro_sr_ckpt(tmp_path_factory, micro_archive):
    out = tmp_path_factory.mktemp("sr_train")
    cfg = load_config(None, micro_overrides(micro_archive, out / "run"))
    cmd_train_sr(cfg)
    return out / "run" / "sr_ckpt"


def test_cmd_train_sr_checkpoint(micro_sr_ckpt):
    meta = json.loads((micro_sr_ckpt / "metadata.json").read_text())
    assert meta["T"] == 5
    assert "cond_mean" in meta and len(meta["cond_mean"]) == 3
    assert (micro_sr_ckpt / "weights.pt").is_file()
    assert (micro_sr_ckpt.parent / "sr_train_log.csv").is_file()


def test_cmd_super_resolve_outputs(tmp_path, micro_archive, micro_sr_ckpt):
    over = micro_overrides(micro_archive, tmp_path / "sr_out")
    over[("sr", "checkpoint")] = str(micro_sr_ckpt)
    cfg = load_config(None, over)
    out = cmd_super_resolve(cfg)
    assert (out / "sr_metrics.csv").is_file()
    assert (out / "sr_summary.csv").is_file()
    assert (out / "manifest.csv").is_file()
    with (out / "sr_metrics.csv").open() as f:
        rows = list(csv.DictReader(f))
    # held-out fold of 30 samples over 3 folds = 10 tiles
    assert len(rows) == 10
    pngs = list((out / "sr").rglob("*.png"))
    assert len(pngs) == 10
    summary = dict(
        (r["metric"], float(r["value"]))
        for r in csv.DictReader((out / "sr_summary.csv").open())
    )
    assert "mean_psnr_sr" in summary and "mean_psnr_bicubic" in summary


def test_super_resolve_requires_checkpoint(tmp_path, micro_archive):
    cfg = load_config(None, micro_overrides(micro_archive, tmp_path / "x"))
    with pytest.raises(ConfigError, match="checkpoint"):
        cmd_super_resolve(cfg)


def test_deviation_toggle_off_feeds_raw_conditioning(micro_archive):
    # with correction off the model sees the upscaled LR bit-for-bit
    import torch

    from finebuild.data import load_paired_archive
    from finebuild.diffusion import linear_schedule
    from finebuild.orchestration.pipelines import _super_resolve_tiles

    paired, labeled = load_paired_archive(micro_archive, gsd_hr=1.2)
    schedule = linear_schedule(2, 0.01, 0.3)
    seen = []

    class Probe:
        def __call__(self, x, y, g):
            seen.append(x.clone())
            return torch.zeros_like(y)

    cfg = load_config(None, micro_overrides(micro_archive, micro_archive / "ignore"))
    _super_resolve_tiles(paired, labeled, [0, 1], Probe(), schedule, cfg, stats=None)
    raw = np.stack([paired.pairs[i][0].pixels for i in (0, 1)])
    probe_x = seen[0].numpy().transpose(0, 2, 3, 1)
    assert np.array_equal(probe_x, raw.astype(np.float32))


# --- cibm + classifier pipelines ------------------------------------------------------

@pytest.fixture(scope="module")
def micro_weights(tmp_path_factory, micro_archive):
    out = tmp_path_factory.mktemp("cibm") / "run"
    cfg = load_config(None, micro_overrides(micro_archive, out))
    cmd_cibm_weights(cfg)
    return out


def test_cmd_cibm_weights_outputs(micro_weights):
    table = (micro_weights / "weight_table.csv").read_text().splitlines()
    assert table[0] == "class_id,count,p,S,W"
    assert len(table) == 4
    weights = [float(line.split(",")[4]) for line in table[1:]]
    assert sum(weights) == pytest.approx(1.0, abs=1e-9)
    assert (micro_weights / "spread" / "spread_summary.csv").is_file()
    assert (micro_weights / "spread" / "spread_rect.png").is_file()


@pytest.fixture(scope="module")
def micro_cls_ckpt(tmp_path_factory, micro_archive, micro_weights):
    out = tmp_path_factory.mktemp("cls") / "run"
    over = micro_overrides(micro_archive, out)
    over[("cibm", "weight_table")] = str(micro_weights / "weight_table.csv")
    cfg = load_config(None, over)
    cmd_train_cls(cfg)
    return out / "cls_ckpt"


def test_cmd_train_cls_outputs(micro_cls_ckpt):
    meta = json.loads((micro_cls_ckpt / "metadata.json").read_text())
    assert meta["fold"] == 0
    assert meta["config"]["sampler"] == "cibm"
    log = (micro_cls_ckpt / "train_log.csv").read_text().splitlines()
    assert log[0] == "epoch,lr,loss,l_con,l_cls,train_top1"
    assert len(log) == 2


def test_train_cls_requires_weight_table(tmp_path, micro_archive):
    cfg = load_config(None, micro_overrides(micro_archive, tmp_path / "y"))
    with pytest.raises(ConfigError, match="weight_table"):
        cmd_train_cls(cfg)


def test_cmd_eval_consistency(tmp_path, micro_archive, micro_cls_ckpt):
    over = micro_overrides(micro_archive, tmp_path / "eval")
    over[("classifier", "checkpoint")] = str(micro_cls_ckpt)
    cfg = load_config(None, over)
    out = cmd_eval(cfg)
    metrics = dict(
        (r["metric"], r["value"]) for r in csv.DictReader((out / "metrics.csv").open())
    )
    with (out / "confusion_matrix.csv").open() as f:
        rows = list(csv.reader(f))
    cm = np.array([[int(v) for v in row[1:]] for row in rows[1:]])
    assert float(metrics["top1"]) == pytest.approx(cm.trace() / cm.sum(), abs=1e-9)
    # per-class fold counts: 12,12,6 over 3 folds -> 4,4,2
    assert cm.sum(axis=1).tolist() == [4, 4, 2]
    assert (out / "per_class_metrics.png").is_file()
    assert (out / "folds_note.txt").is_file()


def test_cmd_eval_multi_checkpoint_mean(tmp_path, micro_archive, micro_weights):
    ckpts = []
    for fold in (0, 1):
        out = tmp_path / f"cls_f{fold}"
        over = micro_overrides(micro_archive, out)
        over[("data", "fold")] = str(fold)
        over[("cibm", "sampler")] = "uniform"
        over[("classifier", "alpha")] = "0"
        cfg = load_config(None, over)
        cmd_train_cls(cfg)
        ckpts.append(str(out / "cls_ckpt"))
    over = micro_overrides(micro_archive, tmp_path / "eval_multi")
    over[("eval", "checkpoints")] = ",".join(ckpts)
    cfg = load_config(None, over)
    out = cmd_eval(cfg)
    assert (out / "fold_0" / "metrics.csv").is_file()
    assert (out / "fold_1" / "metrics.csv").is_file()
    assert (out / "mean_metrics.csv").is_file()
    note = (out / "folds_note.txt").read_text()
    assert "0, 1" in note


def test_echo_reproduces_metrics(tmp_path, micro_archive, micro_weights):
    # run once, rerun from the echo, compare metric CSVs byte for byte
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        if run == "a":
            over = micro_overrides(micro_archive, out)
            over[("cibm", "weight_table")] = str(micro_weights / "weight_table.csv")
            cfg = load_config(None, over)
        else:
            cfg = load_config(
                tmp_path / "a" / "config_echo.ini", {("run", "out"): str(out)}
            )
        cmd_train_cls(cfg)
        over_eval = micro_overrides(micro_archive, out / "eval")
        over_eval[("classifier", "checkpoint")] = str(out / "cls_ckpt")
        cmd_eval(load_config(None, over_eval))
        outs.append(out)
    a = (outs[0] / "eval" / "metrics.csv").read_bytes()
    b = (outs[1] / "eval" / "metrics.csv").read_bytes()
    assert a == b
    log_a = (outs[0] / "cls_ckpt" / "train_log.csv").read_bytes()
    log_b = (outs[1] / "cls_ckpt" / "train_log.csv").read_bytes()
    assert log_a == log_b


# --- ablation ---------------------------------------------------------------------------

def test_pct_delta_convention():
    assert _pct_delta(60.45, 52.64) == "+14.8%"
    assert _pct_delta(52.64, 52.64) == "+0.0%"


def test_cmd_ablate_full_matrix(tmp_path, micro_archive, micro_sr_ckpt):
    over = micro_overrides(micro_archive, tmp_path / "abl")
    over[("sr", "checkpoint")] = str(micro_sr_ckpt)
    cfg = load_config(None, over)
    out = cmd_ablate(cfg)
    with (out / "ablation.csv").open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 8
    assert rows[0]["method"] == "bicubic"
    assert rows[-1]["method"] == "diffusion+CIBM+CS"
    for key in ("top1", "top5", "precision", "recall", "f1"):
        assert rows[0][f"delta_{key}"] == "+0.0%"
    assert (out / "ablation.txt").is_file()


# --- report + cli -----------------------------------------------------------------------

def test_cmd_report_regenerates(tmp_path, micro_archive, micro_cls_ckpt):
    over = micro_overrides(micro_archive, tmp_path / "eval")
    over[("classifier", "checkpoint")] = str(micro_cls_ckpt)
    cmd_eval(load_config(None, over))
    (tmp_path / "eval" / "per_class_metrics.png").unlink()
    cfg = load_config(None, {("run", "out"): str(tmp_path / "eval")})
    cmd_report(cfg)
    assert (tmp_path / "eval" / "per_class_metrics.png").is_file()
    assert (tmp_path / "eval" / "report.txt").is_file()


def test_cli_synth_and_exit_codes(tmp_path):
    argv = ["synth", "--out", str(tmp_path / "ds"), "--seed", "3"]
    argv += ["--set", "data.classes=rect,twin", "--set", "data.counts=4,4",
             "--set", "data.hr_size=16", "--set", "data.folds=2"]
    assert main(argv) == 0
    # rerun without overwrite: config error
    assert main(argv) == 2
    # rerun with overwrite: fine
    assert main(argv + ["--overwrite", "true"]) == 0


def test_cli_malformed_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nseed = 1\nmystery = 7\n", encoding="utf-8")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "bad.ini:3" in err


def test_cli_missing_data_exit_3(tmp_path):
    rc = main(
        [
            "train-sr",
            "--out", str(tmp_path / "o"),
            "--set", f"data.root={tmp_path / 'missing'}",
        ]
    )
    assert rc == 3
