"""Pipeline implementations behind the CLI verbs.

Every command validates its inputs, runs inside the configured output
directory, echoes the effective configuration, and finishes by writing a
content-hash manifest of everything it produced.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from pathlib import Path

import numpy as np
import torch

from ..cibm import (
    build_teacher,
    build_weight_table,
    extract_features,
    intra_class_spread_report,
    resize_for_teacher,
)
from ..cibm.weights import CategoryWeightTable
from ..classifier import (
    TrainConfig,
    load_classifier,
    predict_batch,
    teacher_targets,
    train_classifier,
)
from ..classifier.distill import CACHE_ENV
from ..data import (
    AugmentPolicy,
    SynthConfig,
    default_class_specs,
    load_paired_archive,
    make_splits,
    synth_generate,
    upscale_lr,
    write_paired_archive,
)
from ..data.io import load_dataset, save_tile_png, write_labeled_archive
from ..data.splits import split_indices
from ..data.tiles import ImageTile, LabeledDataset
from ..diffusion import (
    DomainStats,
    compute_domain_stats,
    correct_deviation,
    linear_schedule,
    load_checkpoint,
    save_checkpoint,
    super_resolve_batch,
    train_denoiser,
)
from ..errors import ConfigError, MissingData
from ..hashing import derive_seed
from ..imageops import center_crop
from ..metrics import build_report, consistency, psnr, ssim
from .artifacts import prepare_out_dir, write_run_manifest
from .config import parse_int_list, parse_list
from .plots import per_class_bars

logger = logging.getLogger(__name__)


# --- shared helpers -----------------------------------------------------------

def _require_root(cfg) -> Path:
    root = Path(cfg["data"]["root"])
    if not cfg["data"]["root"]:
        raise ConfigError("[data] root must point at a dataset archive")
    if not root.is_dir():
        raise MissingData(f"dataset root does not exist: {root}")
    return root


def _load_labeled(cfg) -> LabeledDataset:
    root = _require_root(cfg)
    return load_dataset(root, root / "manifest.csv", gsd_meters=cfg["data"]["gsd"])


def _splits(cfg, labeled: LabeledDataset):
    assignment = make_splits(labeled, cfg["data"]["folds"], cfg["run"]["seed"])
    return split_indices(labeled, assignment, cfg["data"]["fold"])


def _weight_table_for(
    labeled: LabeledDataset, indices: list[int], cfg
) -> tuple[CategoryWeightTable, list]:
    teacher = build_teacher(
        seed=cfg["cibm"]["teacher_seed"],
        input_size=cfg["cibm"]["teacher_input"],
        width=cfg["cibm"]["teacher_dim"],
        num_classes=cfg["cibm"]["teacher_classes"],
    )
    sub = labeled.subset(indices)
    fms = []
    for members in sub.indices_by_class():
        tiles = resize_for_teacher([sub.tiles[i] for i in members], teacher)
        fms.append(extract_features(tiles, teacher))
    return build_weight_table(
        fms,
        sub.counts(),
        spread_norm=cfg["cibm"]["spread_norm"],
        class_names=labeled.class_names,
    )


def _build_teacher_from(cfg):
    return build_teacher(
        seed=cfg["cibm"]["teacher_seed"],
        input_size=cfg["cibm"]["teacher_input"],
        width=cfg["cibm"]["teacher_dim"],
        num_classes=cfg["cibm"]["teacher_classes"],
    )


# --- synth ---------------------------------------------------------------------

def cmd_synth(cfg) -> Path:
    """Generate the synthetic paired dataset archive under out/<name>/."""
    out = prepare_out_dir(cfg)
    names = parse_list(cfg["data"]["classes"])
    counts = parse_int_list(cfg["data"]["counts"])
    synth_cfg = SynthConfig(
        class_specs=default_class_specs(names),
        counts=tuple(counts),
        image_size=cfg["data"]["hr_size"],
        scale_factor=cfg["data"]["scale_factor"],
        seed=cfg["run"]["seed"],
        gsd_hr=cfg["data"]["gsd"],
        name=cfg["data"]["name"],
    )
    paired, labeled = synth_generate(synth_cfg)
    archive = out / synth_cfg.name
    write_paired_archive(paired, labeled, archive)
    logger.info("wrote %d pairs to %s", len(paired), archive)
    write_run_manifest(out)
    return archive


# --- super-resolution ------------------------------------------------------------

def cmd_train_sr(cfg) -> Path:
    """Train the denoiser on the training folds of the paired archive."""
    root = _require_root(cfg)
    out = prepare_out_dir(cfg)
    paired, labeled = load_paired_archive(root, gsd_hr=cfg["data"]["gsd"])
    train_idx, _ = _splits(cfg, labeled)
    schedule = linear_schedule(
        cfg["sr"]["t_steps"], cfg["sr"]["beta_start"], cfg["sr"]["beta_end"]
    )
    model, _ = train_denoiser(
        paired,
        train_idx,
        schedule,
        steps=cfg["sr"]["steps"],
        batch_size=cfg["sr"]["batch"],
        lr=cfg["sr"]["lr"],
        a=cfg["sr"]["a"],
        seed=cfg["run"]["seed"],
        base_width=cfg["sr"]["width"],
        log_path=out / "sr_train_log.csv",
        log_every=cfg["sr"]["log_every"],
    )
    ckpt = save_checkpoint(
        model,
        out / "sr_ckpt",
        schedule,
        step=cfg["sr"]["steps"],
        seed=cfg["run"]["seed"],
        base_width=cfg["sr"]["width"],
    )
    # training-domain conditioning statistics for deviation correction
    cond = np.stack([paired.pairs[i][0].pixels for i in train_idx])
    stats = compute_domain_stats(cond)
    meta_path = ckpt / "metadata.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta["cond_mean"] = stats.mean.tolist()
    meta["cond_std"] = stats.std.tolist()
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_run_manifest(out)
    return out


def _super_resolve_tiles(
    paired, labeled, indices, model, schedule, cfg, *, stats: DomainStats | None
) -> list[ImageTile]:
    """Run batched refinement over the selected pairs; returns SR tiles.

    Deviation correction uses the statistics of the whole inference batch,
    so the result is independent of the chunk size used for the model.
    """
    chunk = max(1, cfg["sr"]["infer_batch"])
    seed = cfg["run"]["seed"]
    cond_all = np.stack([paired.pairs[i][0].pixels for i in indices])
    if stats is not None:
        cond_all = correct_deviation(cond_all, stats)
    sr_tiles: list[ImageTile] = []
    for start in range(0, len(indices), chunk):
        part = indices[start : start + chunk]
        xs = torch.from_numpy(
            np.transpose(cond_all[start : start + len(part)], (0, 3, 1, 2)).astype(
                np.float32
            )
        )
        sids = [labeled.tiles[i].sample_id for i in part]
        ys = super_resolve_batch(xs, model, schedule, seed=seed, sample_ids=sids)
        out_np = np.transpose(ys.numpy(), (0, 2, 3, 1))
        for row, i in enumerate(part):
            hr = labeled.tiles[i]
            sr_tiles.append(
                ImageTile(out_np[row].astype(np.float32), hr.gsd_meters,
                          hr.class_id, hr.sample_id)
            )
    return sr_tiles


def cmd_super_resolve(cfg) -> Path:
    """Super-resolve a split of the paired archive; writes the SR image tree
    plus per-image and summary quality metrics against the HR truth."""
    root = _require_root(cfg)
    if not cfg["sr"]["checkpoint"]:
        raise ConfigError("[sr] checkpoint is required for super-resolve")
    model, meta, schedule = load_checkpoint(Path(cfg["sr"]["checkpoint"]))
    out = prepare_out_dir(cfg)
    paired, labeled = load_paired_archive(root, gsd_hr=cfg["data"]["gsd"])
    train_idx, test_idx = _splits(cfg, labeled)
    indices = {"test": test_idx, "train": train_idx,
               "all": list(range(len(labeled)))}[cfg["sr"]["infer_split"]]

    stats = None
    if cfg["sr"]["deviation_correction"]:
        if "cond_mean" not in meta:
            raise ConfigError("checkpoint lacks conditioning statistics")
        stats = DomainStats(
            mean=np.asarray(meta["cond_mean"]), std=np.asarray(meta["cond_std"])
        )
    sr_tiles = _super_resolve_tiles(
        paired, labeled, indices, model, schedule, cfg, stats=stats
    )

    factor = paired.scale_factor
    rows = []
    for tile, i in zip(sr_tiles, indices):
        hr = labeled.tiles[i]
        lr = paired.lr_tiles[i]
        bicubic = paired.pairs[i][0]
        rel = f"sr/{labeled.class_names[tile.class_id]}/{tile.sample_id}.png"
        save_tile_png(tile.pixels, out / rel)
        rows.append(
            {
                "sample_id": tile.sample_id,
                "psnr_sr": psnr(hr.pixels, tile.pixels),
                "ssim_sr": ssim(hr.pixels, tile.pixels),
                "consistency_sr": consistency(lr.pixels, tile.pixels, factor),
                "psnr_bicubic": psnr(hr.pixels, bicubic.pixels),
                "ssim_bicubic": ssim(hr.pixels, bicubic.pixels),
                "consistency_bicubic": consistency(lr.pixels, bicubic.pixels, factor),
            }
        )
    sr_labeled = LabeledDataset(tiles=tuple(sr_tiles), class_names=labeled.class_names)
    write_labeled_archive(sr_labeled, out, subdir="sr")

    fields = list(rows[0].keys())
    with (out / "sr_metrics.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(
                {k: (v if isinstance(v, str) else f"{v:.8f}") for k, v in row.items()}
            )
    with (out / "sr_summary.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["metric", "value"])
        for key in fields[1:]:
            w.writerow([f"mean_{key}", f"{np.mean([r[key] for r in rows]):.8f}"])
    write_run_manifest(out)
    return out


# --- balancing --------------------------------------------------------------------

def cmd_cibm_weights(cfg) -> Path:
    """Compute the category weight table over the training folds and emit
    the intra-class spread report."""
    out = prepare_out_dir(cfg)
    labeled = _load_labeled(cfg)
    train_idx, _ = _splits(cfg, labeled)
    table, dms = _weight_table_for(labeled, train_idx, cfg)
    table.save(out / "weight_table.csv")
    intra_class_spread_report(
        dms, out / "spread", bins=cfg["cibm"]["bins"], class_names=labeled.class_names
    )
    write_run_manifest(out)
    return out


# --- classifier ---------------------------------------------------------------------

def cmd_train_cls(cfg) -> Path:
    """Train the dual-head classifier on the training folds."""
    out = prepare_out_dir(cfg)
    labeled = _load_labeled(cfg)
    train_idx, _ = _splits(cfg, labeled)

    weight_table = None
    if cfg["cibm"]["sampler"] == "cibm":
        path = cfg["cibm"]["weight_table"]
        if not path:
            raise ConfigError(
                "[cibm] weight_table is required when sampler=cibm "
                "(run cibm-weights first)"
            )
        weight_table = CategoryWeightTable.load(Path(path))

    targets = None
    if cfg["classifier"]["alpha"] > 0.0:
        teacher = _build_teacher_from(cfg)
        env_cache = os.environ.get(CACHE_ENV, "")
        cache_dir = Path(env_cache) if env_cache else out / "cache"
        targets = teacher_targets(labeled, teacher, cache_dir=cache_dir)

    train_cfg = TrainConfig(
        alpha=cfg["classifier"]["alpha"],
        epochs=cfg["classifier"]["epochs"],
        lr_start=cfg["classifier"]["lr_start"],
        lr_end=cfg["classifier"]["lr_end"],
        batch_size=cfg["classifier"]["batch"],
        seed=cfg["run"]["seed"],
        augmentation=AugmentPolicy(
            hflip_prob=cfg["classifier"]["hflip"], crop_size=cfg["classifier"]["crop"]
        ),
        sampler=cfg["cibm"]["sampler"],
        width=cfg["classifier"]["width"],
        teacher_classes=cfg["cibm"]["teacher_classes"],
    )
    ckpt_dir = out / "cls_ckpt"
    train_classifier(
        train_cfg, labeled, train_idx,
        weight_table=weight_table, targets=targets, out_dir=ckpt_dir,
    )
    # record the fold pairing so eval can reconstruct the held-out set
    meta_path = ckpt_dir / "metadata.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta["fold"] = cfg["data"]["fold"]
    meta["folds"] = cfg["data"]["folds"]
    meta["data_root"] = str(Path(cfg["data"]["root"]))
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_run_manifest(out)
    return out


def _eval_checkpoint(cfg, labeled: LabeledDataset, ckpt_dir: Path):
    model, meta = load_classifier(ckpt_dir)
    fold = meta.get("fold", cfg["data"]["fold"])
    assignment = make_splits(labeled, meta.get("folds", cfg["data"]["folds"]),
                             cfg["run"]["seed"])
    _, test_idx = split_indices(labeled, assignment, fold)
    size = model.input_size
    tiles = []
    for i in test_idx:
        t = labeled.tiles[i]
        if t.height != size or t.width != size:
            t = t.with_pixels(center_crop(t.pixels, size))
        tiles.append(t)
    ranked_pairs = predict_batch(model, tiles)
    ranked = [[c for c, _ in row] for row in ranked_pairs]
    labels = [labeled.tiles[i].class_id for i in test_idx]
    return build_report(ranked, labels, labeled.class_names), fold


def cmd_eval(cfg) -> Path:
    """Evaluate one or more classifier checkpoints on their held-out folds;
    multiple checkpoints additionally produce the cross-fold mean."""
    out = prepare_out_dir(cfg)
    labeled = _load_labeled(cfg)
    ckpts = parse_list(cfg["eval"]["checkpoints"])
    if not ckpts and cfg["classifier"]["checkpoint"]:
        ckpts = [cfg["classifier"]["checkpoint"]]
    if not ckpts:
        raise ConfigError(
            "set [classifier] checkpoint or [eval] checkpoints for eval"
        )

    reports = []
    for ckpt in ckpts:
        report, fold = _eval_checkpoint(cfg, labeled, Path(ckpt))
        reports.append((fold, report))
        dest = out if len(ckpts) == 1 else out / f"fold_{fold}"
        report.save(dest)
        per_class_bars(
            list(labeled.class_names),
            report.per_class.precision,
            report.per_class.recall,
            report.per_class.f1,
            dest / "per_class_metrics.png",
        )

    note = [
        "Folds evaluated: " + ", ".join(str(f) for f, _ in reports),
        "Single-fold results are reported per fold; the mean below averages "
        "all evaluated folds." if len(reports) > 1 else
        "Only this fold was evaluated; no cross-fold mean applies.",
    ]
    (out / "folds_note.txt").write_text("\n".join(note) + "\n", encoding="utf-8")
    if len(reports) > 1:
        with (out / "mean_metrics.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["metric", "value"])
            for key in ("top1", "top5"):
                w.writerow(
                    [key, f"{np.mean([getattr(r, key) for _, r in reports]):.12g}"]
                )
            for key in ("mean_precision", "mean_recall", "mean_f1"):
                w.writerow(
                    [
                        key,
                        f"{np.mean([getattr(r.per_class, key) for _, r in reports]):.12g}",
                    ]
                )
    write_run_manifest(out)
    return out


# --- ablation -------------------------------------------------------------------------

def _ablation_inputs(cfg, mode: str, paired, labeled, out: Path) -> LabeledDataset:
    """Classifier input images for one SR mode, cached under the run dir."""
    cache = out / "cells" / "_inputs" / mode
    if (cache / "manifest.csv").is_file():
        return load_dataset(cache, cache / "manifest.csv", gsd_meters=cfg["data"]["gsd"])
    if mode == "bicubic":
        tiles = [
            upscale_lr(lr, paired.scale_factor, "bicubic") for lr in paired.lr_tiles
        ]
        variant = LabeledDataset(tiles=tuple(tiles), class_names=labeled.class_names)
    else:
        if not cfg["sr"]["checkpoint"]:
            raise ConfigError("[sr] checkpoint is required for the diffusion cells")
        model, meta, schedule = load_checkpoint(Path(cfg["sr"]["checkpoint"]))
        stats = None
        if cfg["sr"]["deviation_correction"] and "cond_mean" in meta:
            stats = DomainStats(
                mean=np.asarray(meta["cond_mean"]), std=np.asarray(meta["cond_std"])
            )
        tiles = _super_resolve_tiles(
            paired, labeled, list(range(len(labeled))), model, schedule, cfg,
            stats=stats,
        )
        variant = LabeledDataset(tiles=tuple(tiles), class_names=labeled.class_names)
    write_labeled_archive(variant, cache, subdir="img")
    return variant


def _pct_delta(value: float, base: float) -> str:
    if base == 0:
        return "n/a"
    return f"{100.0 * (value - base) / base:+.1f}%"


def cmd_ablate(cfg) -> Path:
    """Run the {SR mode} x {balanced sampling} x {distillation} matrix with a
    shared seed and emit the combined table with relative increments."""
    root = _require_root(cfg)
    out = prepare_out_dir(cfg)
    paired, labeled = load_paired_archive(root, gsd_hr=cfg["data"]["gsd"])
    sr_modes = parse_list(cfg["ablate"]["sr_modes"])
    cibm_flags = [f == "on" for f in parse_list(cfg["ablate"]["cibm"])]
    cs_flags = [f == "on" for f in parse_list(cfg["ablate"]["cs"])]

    results = []
    for mode in sr_modes:
        variant = _ablation_inputs(cfg, mode, paired, labeled, out)
        train_idx, _ = _splits(cfg, variant)
        table = None
        teacher = None
        for use_cibm in cibm_flags:
            for use_cs in cs_flags:
                name = mode + ("+CIBM" if use_cibm else "") + ("+CS" if use_cs else "")
                cell_dir = out / "cells" / name.replace("+", "_")
                if use_cibm and table is None:
                    table, _ = _weight_table_for(variant, train_idx, cfg)
                targets = None
                if use_cs:
                    if teacher is None:
                        teacher = _build_teacher_from(cfg)
                    targets = teacher_targets(
                        variant, teacher, cache_dir=out / "cells" / "_cache"
                    )
                train_cfg = TrainConfig(
                    alpha=cfg["classifier"]["alpha"] if use_cs else 0.0,
                    epochs=cfg["classifier"]["epochs"],
                    lr_start=cfg["classifier"]["lr_start"],
                    lr_end=cfg["classifier"]["lr_end"],
                    batch_size=cfg["classifier"]["batch"],
                    seed=cfg["run"]["seed"],
                    augmentation=AugmentPolicy(
                        hflip_prob=cfg["classifier"]["hflip"],
                        crop_size=cfg["classifier"]["crop"],
                    ),
                    sampler="cibm" if use_cibm else "uniform",
                    width=cfg["classifier"]["width"],
                    teacher_classes=cfg["cibm"]["teacher_classes"],
                )
                train_classifier(
                    train_cfg, variant, train_idx,
                    weight_table=table if use_cibm else None,
                    targets=targets, out_dir=cell_dir,
                )
                meta_path = cell_dir / "metadata.json"
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
                meta["fold"] = cfg["data"]["fold"]
                meta["folds"] = cfg["data"]["folds"]
                meta_path.write_text(
                    json.dumps(meta, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8",
                )
                report, _ = _eval_checkpoint(cfg, variant, cell_dir)
                report.save(cell_dir)
                results.append(
                    {
                        "method": name,
                        "top1": report.top1,
                        "top5": report.top5,
                        "precision": report.per_class.mean_precision,
                        "recall": report.per_class.mean_recall,
                        "f1": report.per_class.mean_f1,
                    }
                )

    write_ablation_tables(results, out)
    write_run_manifest(out)
    return out


def write_ablation_tables(results: list[dict], out: Path) -> None:
    """Emit ablation.csv and ablation.txt; the first row is the baseline and
    every metric carries a relative-increment column against it."""
    base = results[0]
    metric_keys = ["top1", "top5", "precision", "recall", "f1"]
    with (Path(out) / "ablation.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        header = ["method"]
        for key in metric_keys:
            header += [key, f"delta_{key}"]
        w.writerow(header)
        for row in results:
            fields = [row["method"]]
            for key in metric_keys:
                fields += [f"{100 * row[key]:.2f}", _pct_delta(row[key], base[key])]
            w.writerow(fields)

    lines = [
        f"{'Method':<24}" + "".join(
            f"{key.capitalize():>10}{'Δ':>8}" for key in metric_keys
        )
    ]
    for row in results:
        cells = ""
        for key in metric_keys:
            cells += f"{100 * row[key]:>10.2f}{_pct_delta(row[key], base[key]):>8}"
        lines.append(f"{row['method']:<24}" + cells)
    (Path(out) / "ablation.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- report ----------------------------------------------------------------------------

def cmd_report(cfg) -> Path:
    """Re-render plots and a text summary from an existing run directory."""
    out = Path(cfg["run"]["out"])
    if not out.is_dir():
        raise MissingData(f"run directory not found: {out}")
    produced = []
    per_class = out / "per_class.csv"
    if per_class.is_file():
        with per_class.open(newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        per_class_bars(
            [r["class"] for r in rows],
            np.array([float(r["precision"]) for r in rows]),
            np.array([float(r["recall"]) for r in rows]),
            np.array([float(r["f1"]) for r in rows]),
            out / "per_class_metrics.png",
        )
        produced.append("per_class_metrics.png")
    summary_lines = []
    for name in ("metrics.csv", "sr_summary.csv", "mean_metrics.csv"):
        path = out / name
        if path.is_file():
            summary_lines.append(f"== {name}")
            summary_lines.extend(path.read_text(encoding="utf-8").splitlines())
    if summary_lines:
        (out / "report.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
        produced.append("report.txt")
    if not produced:
        raise MissingData(f"nothing reportable found under {out}")
    write_run_manifest(out)
    return out
