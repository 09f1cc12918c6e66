"""Tile-level rescaling."""

from __future__ import annotations

from dataclasses import replace

from ..errors import InvalidFactor
from ..imageops import interp_upscale
from .tiles import ImageTile


def upscale_lr(tile: ImageTile, factor: int, method: str = "bicubic") -> ImageTile:
    """Interpolate a LR tile up by an integer factor.

    The ground sample distance shrinks by the same factor; pixel values are
    clamped back to [-1, 1] after interpolation.
    """
    if factor < 1:
        raise InvalidFactor(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return tile
    up = interp_upscale(tile.pixels, factor, method)
    return replace(tile, pixels=up, gsd_meters=tile.gsd_meters / factor)
