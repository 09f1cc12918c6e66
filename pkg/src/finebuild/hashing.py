"""Small hashing helpers used for schedule identity, rng stream derivation
and artifact manifests."""

from __future__ import annotations

import hashlib
from pathlib import Path

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_seed(*parts: object) -> int:
    """Derive a 63-bit rng seed from arbitrary parts, joined by ';'."""
    return fnv1a64(";".join(str(p) for p in parts)) & 0x7FFFFFFFFFFFFFFF


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
