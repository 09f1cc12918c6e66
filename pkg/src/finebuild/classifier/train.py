"""Student training loop, prediction, and checkpoint persistence.

The loop is a single writer over the model parameters: adaptive-moment
updates without weight decay, a step-down learning-rate schedule (x0.1 at
40% / 70% / 90% of the epochs, clipped at lr_end), flip/crop augmentation,
and one of three batch samplers (uniform, inverse-frequency, balanced).
Deterministic under a fixed seed in single-worker mode.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import islice
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigMismatch, InputSizeMismatch, MissingData, NonFiniteLoss
from ..hashing import derive_seed
from ..cibm.sampler import weighted_sampler
from ..cibm.weights import CategoryWeightTable, frequency_weights
from ..data.augment import AugmentPolicy, augment
from ..data.tiles import ImageTile, LabeledDataset
from .losses import combined_loss, torch_classification_loss, torch_contrastive_loss
from .network import DualHeadClassifier, build_classifier

SAMPLERS = ("uniform", "frequency", "cibm")
LR_DROP_FRACTIONS = (0.4, 0.7, 0.9)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.7
    epochs: int = 50
    lr_start: float = 1.5e-2
    lr_end: float = 1e-5
    batch_size: int = 64
    seed: int = 0
    augmentation: AugmentPolicy = field(default_factory=AugmentPolicy)
    sampler: str = "uniform"
    width: int = 80
    teacher_classes: int = 16

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigMismatch(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.lr_start >= self.lr_end > 0:
            raise ConfigMismatch("need lr_start >= lr_end > 0")
        if self.sampler not in SAMPLERS:
            raise ConfigMismatch(f"sampler must be one of {SAMPLERS}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigMismatch("epochs and batch_size must be >= 1")


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """Step-down schedule: multiply by 0.1 at the 40%/70%/90% epoch marks."""
    drops = sum(epoch >= math.ceil(f * config.epochs) for f in LR_DROP_FRACTIONS)
    return max(config.lr_end, config.lr_start * (0.1 ** drops))


def _batch_tensor(tiles: list[ImageTile]) -> torch.Tensor:
    arr = np.stack([np.transpose(t.pixels, (2, 0, 1)) for t in tiles])
    return torch.from_numpy(arr.astype(np.float32))


def _make_sampler(config: TrainConfig, dataset: LabeledDataset,
                  train_indices: list[int],
                  weight_table: CategoryWeightTable | None,
                  rng: np.random.Generator):
    if config.sampler == "uniform":
        return None
    sub = dataset.subset(train_indices)
    per_class = [
        [train_indices[i] for i in members] for members in sub.indices_by_class()
    ]
    if config.sampler == "frequency":
        weights = frequency_weights(sub.counts())
    else:
        if weight_table is None:
            raise ConfigMismatch("sampler='cibm' requires a weight table")
        weights = weight_table.weights
        if len(weights) != dataset.num_classes:
            raise ConfigMismatch(
                f"weight table has {len(weights)} classes, dataset has "
                f"{dataset.num_classes}"
            )
    return weighted_sampler(weights, per_class, rng)


def train_classifier(
    config: TrainConfig,
    dataset: LabeledDataset,
    train_indices: list[int],
    *,
    num_classes: int | None = None,
    weight_table: CategoryWeightTable | None = None,
    targets=None,
    out_dir: Path | None = None,
) -> tuple[DualHeadClassifier, list[dict]]:
    """Train the dual-head student; returns the model and per-epoch log rows.

    ``targets`` holds one TeacherTarget per dataset sample (any order);
    required whenever alpha > 0. When ``out_dir`` is set, the checkpoint
    directory and train_log.csv are written there.
    """
    k = dataset.num_classes
    if num_classes is not None and num_classes != k:
        raise ConfigMismatch(f"configured K={num_classes} but dataset has {k} classes")
    target_by_sid: dict[str, int] = {}
    if config.alpha > 0.0:
        if targets is None:
            raise ConfigMismatch("alpha > 0 requires teacher targets")
        target_by_sid = {t.sample_id: t.c for t in targets}
        for c in target_by_sid.values():
            if c >= config.teacher_classes:
                raise ConfigMismatch(
                    f"teacher target {c} >= teacher_classes {config.teacher_classes}"
                )

    model = build_classifier(
        k, config.teacher_classes, width=config.width,
        seed=derive_seed(config.seed, "cls-model"),
    )
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=config.lr_start, weight_decay=0.0)
    rng = np.random.default_rng(derive_seed(config.seed, "cls-train"))
    stream = _make_sampler(config, dataset, train_indices, weight_table, rng)

    n = len(train_indices)
    steps_per_epoch = max(1, math.ceil(n / config.batch_size))
    log: list[dict] = []
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        for group in opt.param_groups:
            group["lr"] = lr
        if stream is None:
            order = [train_indices[i] for i in rng.permutation(n)]
        sum_loss = sum_con = sum_cls = 0.0
        hits = seen = 0
        for step in range(steps_per_epoch):
            if stream is None:
                idx = order[step * config.batch_size : (step + 1) * config.batch_size]
                if not idx:
                    continue
            else:
                idx = list(islice(stream, config.batch_size))
            tiles = [
                augment(
                    dataset.tiles[i],
                    config.augmentation,
                    derive_seed(config.seed, "aug", epoch, step, slot),
                )
                for slot, i in enumerate(idx)
            ]
            images = _batch_tensor(tiles)
            labels = torch.tensor([t.class_id for t in tiles], dtype=torch.long)
            task_logits, distill_logits = model(images)
            l_cls = torch_classification_loss(task_logits, labels)
            if config.alpha > 0.0:
                tc = torch.tensor(
                    [target_by_sid[t.sample_id] for t in tiles], dtype=torch.long
                )
                l_con = torch_contrastive_loss(distill_logits, tc)
            else:
                l_con = torch.zeros(())
            loss = config.alpha * l_con + (1.0 - config.alpha) * l_cls
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}: loss is not finite")
            opt.zero_grad()
            loss.backward()
            opt.step()
            bs = len(tiles)
            sum_loss += float(loss.item()) * bs
            sum_con += float(l_con.item()) * bs
            sum_cls += float(l_cls.item()) * bs
            hits += int((task_logits.argmax(dim=1) == labels).sum().item())
            seen += bs
        log.append(
            {
                "epoch": epoch,
                "lr": lr,
                "loss": sum_loss / seen,
                "l_con": sum_con / seen,
                "l_cls": sum_cls / seen,
                "train_top1": hits / seen,
            }
        )
    model.eval()
    model.input_size = config.augmentation.effective_crop(
        dataset.tiles[0].height, dataset.tiles[0].width
    )
    if out_dir is not None:
        _save(model, config, dataset, log, Path(out_dir))
    return model, log


def _save(model, config: TrainConfig, dataset: LabeledDataset, log, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = asdict(config)
    cfg["augmentation"] = asdict(config.augmentation)
    meta = {
        "config": cfg,
        "num_classes": dataset.num_classes,
        "class_names": list(dataset.class_names),
        "epoch": config.epochs - 1,
        "seed": config.seed,
        "input_size": model.input_size,
        "metrics": {k: log[-1][k] for k in ("loss", "l_con", "l_cls", "train_top1")},
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    torch.save(model.state_dict(), out_dir / "weights.pt")
    with (out_dir / "train_log.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "lr", "loss", "l_con", "l_cls", "train_top1"])
        for row in log:
            w.writerow(
                [
                    row["epoch"],
                    f"{row['lr']:.8g}",
                    f"{row['loss']:.8f}",
                    f"{row['l_con']:.8f}",
                    f"{row['l_cls']:.8f}",
                    f"{row['train_top1']:.6f}",
                ]
            )


def load_classifier(ckpt_dir: Path) -> tuple[DualHeadClassifier, dict]:
    ckpt_dir = Path(ckpt_dir)
    meta_path = ckpt_dir / "metadata.json"
    if not meta_path.is_file():
        raise MissingData(f"no checkpoint metadata at {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    model = DualHeadClassifier(
        meta["num_classes"],
        meta["config"]["teacher_classes"],
        width=meta["config"]["width"],
    )
    model.load_state_dict(torch.load(ckpt_dir / "weights.pt", weights_only=True))
    model.eval()
    model.input_size = meta["input_size"]
    return model, meta


def predict(model: DualHeadClassifier, tile: ImageTile) -> list[tuple[int, float]]:
    """Ranked (class_id, probability) list for one tile."""
    return predict_batch(model, [tile])[0]


def predict_batch(
    model: DualHeadClassifier, tiles: list[ImageTile]
) -> list[list[tuple[int, float]]]:
    expected = getattr(model, "input_size", None)
    if expected is not None:
        for t in tiles:
            if t.height != expected or t.width != expected:
                raise InputSizeMismatch(
                    f"tile {t.sample_id} is {t.height}x{t.width}, model expects "
                    f"{expected}x{expected}"
                )
    with torch.no_grad():
        task_logits, _ = model(_batch_tensor(tiles))
        probs = torch.softmax(task_logits.double(), dim=1).numpy()
    ranked = []
    for row in probs:
        order = np.argsort(-row, kind="stable")
        ranked.append([(int(c), float(row[c])) for c in order])
    return ranked
