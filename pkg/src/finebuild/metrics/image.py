"""Image quality metrics for super-resolution outputs.

Inputs are channels-last float arrays; PSNR defaults to the [-1, 1] domain
(peak 2.0, configurable to 255 for 8-bit buffers) and caps identical
images at 100 dB. SSIM is single-scale with a Gaussian window (11x11,
sigma 1.5, shrunk to the largest odd size that fits when images are
smaller), valid-mode windows only, averaged over channels. Consistency is
the MSE between the LR input and the area-downsampled SR output, reported
in units of 1e-5.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from ..errors import ShapeMismatch
from ..imageops import area_downsample

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 2.0) -> float:
    """10 log10(peak^2 / MSE) in dB, capped at 100 for identical images."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} != {b.shape}")
    if peak <= 0:
        raise ShapeMismatch(f"peak must be positive, got {peak}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g1 = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    k = np.outer(g1, g1)
    return k / k.sum()


def _ssim_channel(x: np.ndarray, y: np.ndarray, window: np.ndarray,
                  c1: float, c2: float) -> float:
    mu_x = convolve2d(x, window, mode="valid")
    mu_y = convolve2d(y, window, mode="valid")
    xx = convolve2d(x * x, window, mode="valid") - mu_x * mu_x
    yy = convolve2d(y * y, window, mode="valid") - mu_y * mu_y
    xy = convolve2d(x * y, window, mode="valid") - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray, dynamic_range: float = 2.0) -> float:
    """Mean structural similarity over channels, in [-1, 1]."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} != {b.shape}")
    x = a.astype(np.float64)
    y = b.astype(np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
        y = y[:, :, None]
    h, w, channels = x.shape
    size = min(SSIM_WINDOW, h, w)
    if size % 2 == 0:
        size -= 1
    if size < 1:
        raise ShapeMismatch("image too small for SSIM")
    window = gaussian_window(size, SSIM_SIGMA)
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    return float(
        np.mean([_ssim_channel(x[:, :, c], y[:, :, c], window, c1, c2)
                 for c in range(channels)])
    )


def consistency(lr_input: np.ndarray, sr_output: np.ndarray, factor: int) -> float:
    """MSE between the LR input and the area-downsampled SR output, in
    units of 1e-5 (so an MSE of 1e-4 reports as 10.0)."""
    h, w = lr_input.shape[:2]
    if sr_output.shape[0] != h * factor or sr_output.shape[1] != w * factor:
        raise ShapeMismatch(
            f"SR {sr_output.shape[:2]} is not {factor}x the LR {lr_input.shape[:2]}"
        )
    down = area_downsample(sr_output.astype(np.float64), factor)
    mse = float(np.mean((lr_input.astype(np.float64) - down) ** 2))
    return mse / 1e-5
