"""Run configuration.

One INI-style file per run, sections mirroring the pipeline stages. Every
key has a documented default below; unknown sections or keys are rejected
with the offending line number. Precedence is flag > file > default, and
the full effective configuration is echoed into each run's output
directory so a run can be reproduced from its echo alone.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from ..errors import ConfigError

# section -> key -> (type tag, default, help)
SCHEMA: dict[str, dict[str, tuple[str, object, str]]] = {
    "run": {
        "seed": ("int", 0, "master seed; every stream derives from it"),
        "out": ("str", "out/run", "output directory for this run"),
        "overwrite": ("bool", False, "allow writing into a non-empty output dir"),
    },
    "data": {
        "source": ("str", "synthetic", "synthetic | real"),
        "root": ("str", "", "dataset root (archive directory with manifest.csv)"),
        "gsd": ("float", 1.2, "ground sample distance assigned on load, meters"),
        "name": ("str", "synth", "archive name; synth writes under out/<name>/"),
        "classes": ("str", "rect,bigrect,lshape,courtyard,twin,cross",
                    "synthetic class names (shape archetypes)"),
        "counts": ("str", "500,500,500,500,500,50", "per-class sample counts"),
        "hr_size": ("int", 32, "high-resolution tile side"),
        "scale_factor": ("int", 4, "HR side / LR side"),
        "folds": ("int", 5, "stratified fold count"),
        "fold": ("int", 0, "held-out fold index"),
    },
    "sr": {
        "t_steps": ("int", 200, "diffusion step count T"),
        "beta_start": ("float", 1e-4, "first beta of the linear schedule"),
        "beta_end": ("float", 0.02, "last beta of the linear schedule"),
        "steps": ("int", 4500, "denoiser training steps"),
        "batch": ("int", 32, "training batch size"),
        "lr": ("float", 1e-3, "denoiser Adam learning rate"),
        "a": ("int", 2, "objective norm exponent, 1 or 2"),
        "width": ("int", 32, "U-Net base channel width"),
        "deviation_correction": ("bool", False,
                                 "align conditioning statistics; for inference "
                                 "on a shifted domain only"),
        "infer_batch": ("int", 100, "images per inference chunk"),
        "infer_split": ("str", "test", "test | train | all"),
        "checkpoint": ("str", "", "denoiser checkpoint dir (inference/ablation)"),
        "log_every": ("int", 100, "training log interval"),
    },
    "cibm": {
        "sampler": ("str", "cibm", "uniform | frequency | cibm"),
        "spread_norm": ("str", "raw", "raw | mean"),
        "teacher_seed": ("int", 77, "frozen teacher weight seed"),
        "teacher_dim": ("int", 64, "teacher embedding width"),
        "teacher_classes": ("int", 16, "teacher label-space size"),
        "teacher_input": ("int", 32, "teacher input side"),
        "bins": ("int", 30, "spread histogram bins"),
        "weight_table": ("str", "", "weight table CSV (required for cibm sampler)"),
    },
    "classifier": {
        "alpha": ("float", 0.7, "distillation mix; 0 disables it"),
        "epochs": ("int", 50, "training epochs"),
        "lr_start": ("float", 1.5e-2, "initial learning rate"),
        "lr_end": ("float", 1e-5, "learning-rate floor"),
        "batch": ("int", 64, "batch size"),
        "hflip": ("float", 0.5, "horizontal flip probability"),
        "crop": ("int", 0, "random crop side; 0 keeps the full tile"),
        "width": ("int", 80, "backbone stem width (80 is about 1M parameters)"),
        "checkpoint": ("str", "", "classifier checkpoint dir (for eval)"),
    },
    "eval": {
        "checkpoints": ("str", "", "comma list of checkpoint dirs (multi-fold)"),
    },
    "ablate": {
        "sr_modes": ("str", "bicubic,diffusion", "subset of: bicubic,diffusion"),
        "cibm": ("str", "off,on", "subset of: off,on"),
        "cs": ("str", "off,on", "subset of: off,on"),
    },
}

DEFAULTS = {
    section: {key: spec[1] for key, spec in keys.items()}
    for section, keys in SCHEMA.items()
}

_ENUMS = {
    ("data", "source"): {"synthetic", "real"},
    ("sr", "infer_split"): {"test", "train", "all"},
    ("cibm", "sampler"): {"uniform", "frequency", "cibm"},
    ("cibm", "spread_norm"): {"raw", "mean"},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(section: str, key: str, raw: str):
    tag = SCHEMA[section][key][0]
    raw = raw.strip()
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {tag}"
        ) from None


def _line_of(path: Path, needle: str) -> int | None:
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip().lower().startswith(needle.lower()):
            return i
    return None


def load_config(
    path: Path | None = None, overrides: dict[tuple[str, str], str] | None = None
) -> dict[str, dict]:
    """Build the effective configuration: defaults, then file, then flags."""
    cfg = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                line = _line_of(path, f"[{section}]")
                raise ConfigError(
                    f"{path}:{line}: unknown section [{section}]"
                )
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    line = _line_of(path, key)
                    raise ConfigError(
                        f"{path}:{line}: unknown key {key!r} in [{section}]"
                    )
                cfg[section][key] = _coerce(section, key, raw)
    for (section, key), raw in (overrides or {}).items():
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown override {section}.{key}")
        cfg[section][key] = _coerce(section, key, str(raw))
    _validate(cfg)
    return cfg


def _validate(cfg: dict[str, dict]) -> None:
    for (section, key), allowed in _ENUMS.items():
        value = cfg[section][key]
        if value not in allowed:
            raise ConfigError(
                f"[{section}] {key} must be one of {sorted(allowed)}, got {value!r}"
            )
    if cfg["sr"]["a"] not in (1, 2):
        raise ConfigError(f"[sr] a must be 1 or 2, got {cfg['sr']['a']}")
    if not 0.0 <= cfg["classifier"]["alpha"] <= 1.0:
        raise ConfigError("[classifier] alpha must lie in [0, 1]")
    classes = parse_list(cfg["data"]["classes"])
    counts = parse_int_list(cfg["data"]["counts"])
    if cfg["data"]["source"] == "synthetic" and len(classes) != len(counts):
        raise ConfigError(
            f"[data] classes ({len(classes)}) and counts ({len(counts)}) differ"
        )
    for mode in parse_list(cfg["ablate"]["sr_modes"]):
        if mode not in ("bicubic", "diffusion"):
            raise ConfigError(f"[ablate] sr_modes entry {mode!r} unknown")
    for sect_key in ("cibm", "cs"):
        for flag in parse_list(cfg["ablate"][sect_key]):
            if flag not in ("off", "on"):
                raise ConfigError(f"[ablate] {sect_key} entry {flag!r} unknown")


def parse_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def parse_int_list(raw: str) -> list[int]:
    try:
        return [int(item) for item in parse_list(raw)]
    except ValueError:
        raise ConfigError(f"cannot parse integer list from {raw!r}") from None


def save_config(cfg: dict[str, dict], path: Path) -> None:
    """Write the full effective configuration (reproduces the run)."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, values in cfg.items():
        parser[section] = {}
        for key, value in values.items():
            if isinstance(value, bool):
                parser[section][key] = "true" if value else "false"
            elif isinstance(value, float):
                parser[section][key] = repr(value)
            else:
                parser[section][key] = str(value)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        parser.write(f)
