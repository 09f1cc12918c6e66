"""Run output directories and their file manifests."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigError
from ..hashing import sha256_file
from .config import save_config


def prepare_out_dir(cfg: dict) -> Path:
    """Create the run's output directory; refuse to clobber existing output
    unless overwrite is set."""
    out = Path(cfg["run"]["out"])
    if out.exists() and any(out.iterdir()) and not cfg["run"]["overwrite"]:
        raise ConfigError(
            f"output directory {out} is not empty; pass overwrite=true to reuse it"
        )
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config_echo.ini")
    return out


def write_run_manifest(out_dir: Path) -> Path:
    """manifest.json mapping every produced file to its sha256. Pure function
    of the directory contents, so identical runs hash identically."""
    out_dir = Path(out_dir)
    entries = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != "run_manifest.json":
            entries[path.relative_to(out_dir).as_posix()] = sha256_file(path)
    manifest = out_dir / "run_manifest.json"
    manifest.write_text(
        json.dumps({"files": entries}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return manifest
