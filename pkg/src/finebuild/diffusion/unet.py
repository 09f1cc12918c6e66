"""Conditional U-Net denoiser.

Desk-scale architecture: three resolution levels, conditioning by channel
concatenation of the upscaled LR image with the noisy image, and the
continuous noise level injected into every block through a sinusoidal
embedding. Predicts the noise added to the target image.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

GAMMA_EMB_SCALE = 1000.0


def _group_norm(channels: int) -> nn.GroupNorm:
    for groups in (8, 4, 2, 1):
        if channels % groups == 0:
            return nn.GroupNorm(groups, channels)
    return nn.GroupNorm(1, channels)


def gamma_embedding(gamma: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal features of the noise level, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0)
        * torch.arange(half, dtype=gamma.dtype, device=gamma.device)
        / half
    )
    angles = gamma[:, None] * GAMMA_EMB_SCALE * freqs[None, :]
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


class _Block(nn.Module):
    def __init__(self, cin: int, cout: int, emb_dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.norm1 = _group_norm(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.norm2 = _group_norm(cout)
        self.emb_proj = nn.Linear(emb_dim, cout)

    def forward(self, h, emb):
        h = F.silu(self.norm1(self.conv1(h)))
        h = h + self.emb_proj(emb)[:, :, None, None]
        return F.silu(self.norm2(self.conv2(h)))


class ConditionalUNet(nn.Module):
    def __init__(self, image_channels: int = 3, base_width: int = 32,
                 emb_dim: int = 64):
        super().__init__()
        w = base_width
        self.emb_dim = emb_dim
        self.emb_mlp = nn.Sequential(
            nn.Linear(emb_dim, emb_dim * 2), nn.SiLU(), nn.Linear(emb_dim * 2, emb_dim)
        )
        cin = image_channels * 2  # conditioning image concatenated with y_t
        self.enc1 = _Block(cin, w, emb_dim)
        self.enc2 = _Block(w, 2 * w, emb_dim)
        self.enc3 = _Block(2 * w, 4 * w, emb_dim)
        self.mid = _Block(4 * w, 4 * w, emb_dim)
        self.up2 = nn.Conv2d(4 * w, 2 * w, 3, padding=1)
        self.dec2 = _Block(4 * w, 2 * w, emb_dim)
        self.up1 = nn.Conv2d(2 * w, w, 3, padding=1)
        self.dec1 = _Block(2 * w, w, emb_dim)
        self.head = nn.Conv2d(w, image_channels, 3, padding=1)
        # denoiser metadata; set after training / on checkpoint load
        self.schedule_hash: int | None = None

    def forward(self, x_cond: torch.Tensor, y_noisy: torch.Tensor, gamma) -> torch.Tensor:
        if not torch.is_tensor(gamma):
            gamma = torch.full(
                (y_noisy.shape[0],), float(gamma),
                dtype=y_noisy.dtype, device=y_noisy.device,
            )
        emb = self.emb_mlp(gamma_embedding(gamma, self.emb_dim))
        h = torch.cat([x_cond, y_noisy], dim=1)
        e1 = self.enc1(h, emb)
        e2 = self.enc2(F.avg_pool2d(e1, 2), emb)
        e3 = self.enc3(F.avg_pool2d(e2, 2), emb)
        m = self.mid(e3, emb)
        u2 = self.up2(F.interpolate(m, scale_factor=2, mode="nearest"))
        d2 = self.dec2(torch.cat([u2, e2], dim=1), emb)
        u1 = self.up1(F.interpolate(d2, scale_factor=2, mode="nearest"))
        d1 = self.dec1(torch.cat([u1, e1], dim=1), emb)
        return self.head(d1)


def build_denoiser(base_width: int = 32, seed: int = 0,
                   image_channels: int = 3) -> ConditionalUNet:
    """Construct a denoiser with reproducible initial weights."""
    torch.manual_seed(seed)
    model = ConditionalUNet(image_channels=image_channels, base_width=base_width)
    return model
