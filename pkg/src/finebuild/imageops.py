"""Array-level image primitives shared across subpackages.

Images are channels-last float arrays of shape (H, W, C), normalized to
[-1, 1]. The same area-averaging operator is used both to derive synthetic
low-resolution images and to compute the consistency metric, so the
"downsample of the generated pair" identity is exact by construction.
"""

from __future__ import annotations

import numpy as np
import torch

from .errors import InvalidFactor, ShapeMismatch


def area_downsample(pixels: np.ndarray, factor: int) -> np.ndarray:
    """Mean-pool each factor x factor block. H and W must divide evenly."""
    if factor < 1:
        raise InvalidFactor(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return pixels.copy()
    h, w, c = pixels.shape
    if h % factor or w % factor:
        raise ShapeMismatch(f"{h}x{w} not divisible by factor {factor}")
    blocks = pixels.reshape(h // factor, factor, w // factor, factor, c)
    return blocks.mean(axis=(1, 3))


def interp_upscale(pixels: np.ndarray, factor: int, method: str = "bicubic") -> np.ndarray:
    """Upscale (H, W, C) by an integer factor with bicubic or bilinear
    interpolation. Output is clamped to [-1, 1] (bicubic can overshoot)."""
    if factor < 1:
        raise InvalidFactor(f"factor must be >= 1, got {factor}")
    if method not in ("bicubic", "bilinear"):
        raise InvalidFactor(f"unknown interpolation method {method!r}")
    if factor == 1:
        return pixels.copy()
    t = torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32))
    t = t.permute(2, 0, 1).unsqueeze(0)
    up = torch.nn.functional.interpolate(
        t, scale_factor=factor, mode=method, align_corners=False
    )
    out = up.squeeze(0).permute(1, 2, 0).numpy()
    return np.clip(out, -1.0, 1.0)


def resize_to(pixels: np.ndarray, size: int, method: str = "bicubic") -> np.ndarray:
    """Resize (H, W, C) to (size, size, C). Identity when already that size."""
    h, w, _ = pixels.shape
    if h == size and w == size:
        return pixels.copy()
    t = torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32))
    t = t.permute(2, 0, 1).unsqueeze(0)
    out = torch.nn.functional.interpolate(
        t, size=(size, size), mode=method, align_corners=False
    )
    return np.clip(out.squeeze(0).permute(1, 2, 0).numpy(), -1.0, 1.0)


def center_crop(pixels: np.ndarray, size: int) -> np.ndarray:
    h, w, _ = pixels.shape
    if size > h or size > w:
        raise ShapeMismatch(f"crop {size} exceeds image {h}x{w}")
    top = (h - size) // 2
    left = (w - size) // 2
    return pixels[top : top + size, left : left + size].copy()


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Map [-1, 1] floats to 8-bit RGB."""
    scaled = (np.clip(pixels, -1.0, 1.0) + 1.0) * 0.5 * 255.0
    return np.round(scaled).astype(np.uint8)


def from_uint8(raw: np.ndarray) -> np.ndarray:
    """Map 8-bit RGB to [-1, 1] float32."""
    return (raw.astype(np.float32) / 255.0) * 2.0 - 1.0
