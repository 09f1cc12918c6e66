"""Core diffusion operations on torch tensors.

The denoiser is any callable model(x, y_noisy, gamma) -> epsilon-prediction
of y_noisy's shape, where gamma is a float (or per-sample 1-D tensor for
batched inputs). All operations follow the input dtype, so float64 tensors
give float64 math.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
import torch

from ..errors import InvalidGamma, InvalidStep, ScheduleMismatch, ShapeMismatch
from ..hashing import derive_seed
from .schedule import NoiseSchedule

DenoiserFn = Callable[[torch.Tensor, torch.Tensor, float], torch.Tensor]


def forward_noise(y0: torch.Tensor, gamma: float, eps: torch.Tensor) -> torch.Tensor:
    """Noisy image at signal retention gamma:
    sqrt(gamma) * y0 + sqrt(1 - gamma) * eps."""
    if eps.shape != y0.shape:
        raise ShapeMismatch(f"eps {tuple(eps.shape)} != y0 {tuple(y0.shape)}")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidGamma(f"gamma must lie in [0, 1], got {gamma}")
    return math.sqrt(gamma) * y0 + math.sqrt(1.0 - gamma) * eps


def estimate_y0(
    x: torch.Tensor, y_t: torch.Tensor, gamma_t: float, model: DenoiserFn
) -> torch.Tensor:
    """Invert the forward noising given the model's noise estimate:
    (y_t - sqrt(1 - gamma_t) * eps_hat) / sqrt(gamma_t)."""
    if gamma_t <= 0.0:
        raise InvalidGamma(f"gamma_t must be positive, got {gamma_t}")
    eps_hat = model(x, y_t, gamma_t)
    return (y_t - math.sqrt(1.0 - gamma_t) * eps_hat) / math.sqrt(gamma_t)


def posterior_mean(
    x: torch.Tensor,
    y_t: torch.Tensor,
    t: int,
    schedule: NoiseSchedule,
    model: DenoiserFn,
) -> torch.Tensor:
    """Mean of the reverse-step distribution at step t:
    (y_t - (1 - alpha_t) / sqrt(1 - gamma_t) * eps_hat) / sqrt(alpha_t)."""
    if not 1 <= t <= schedule.T:
        raise InvalidStep(f"t={t} outside [1, {schedule.T}]")
    alpha_t = float(schedule.alpha[t - 1])
    gamma_t = float(schedule.gamma[t - 1])
    eps_hat = model(x, y_t, gamma_t)
    coef = (1.0 - alpha_t) / math.sqrt(1.0 - gamma_t)
    return (y_t - coef * eps_hat) / math.sqrt(alpha_t)


def refine_step(
    x: torch.Tensor,
    y_t: torch.Tensor,
    t: int,
    schedule: NoiseSchedule,
    model: DenoiserFn,
    rng: np.random.Generator,
) -> torch.Tensor:
    """One reverse step: posterior mean plus sqrt(1 - alpha_t) * z, with
    z ~ N(0, I) for t > 1 and z = 0 at the final step."""
    mu = posterior_mean(x, y_t, t, schedule, model)
    if t == 1:
        return mu
    alpha_t = float(schedule.alpha[t - 1])
    z = torch.from_numpy(
        rng.standard_normal(tuple(y_t.shape)).astype(np.float64)
    ).to(y_t.dtype)
    return mu + math.sqrt(1.0 - alpha_t) * z


def _check_schedule(model, schedule: NoiseSchedule) -> None:
    expected = getattr(model, "schedule_hash", None)
    if expected is not None and expected != schedule.schedule_hash:
        raise ScheduleMismatch(
            f"model was trained against schedule hash {expected}, "
            f"inference schedule hashes to {schedule.schedule_hash}"
        )


def super_resolve(
    x: torch.Tensor,
    model: DenoiserFn,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> torch.Tensor:
    """Full T-step refinement from pure Gaussian noise, conditioned on the
    upscaled LR image x. Output is clamped to [-1, 1].

    A pure function of (x, model weights, schedule, rng state); the model's
    schedule hash, when present, must match the schedule.
    """
    _check_schedule(model, schedule)
    y = torch.from_numpy(
        rng.standard_normal(tuple(x.shape)).astype(np.float64)
    ).to(x.dtype)
    for t in range(schedule.T, 0, -1):
        y = refine_step(x, y, t, schedule, model, rng)
    return y.clamp(-1.0, 1.0)


def super_resolve_batch(
    xs: torch.Tensor,
    model: DenoiserFn,
    schedule: NoiseSchedule,
    seed: int,
    sample_ids: Sequence[str],
) -> torch.Tensor:
    """Batched refinement with one rng stream per image, derived from
    (seed, sample_id). Each image's result is independent of which other
    images share its batch.
    """
    _check_schedule(model, schedule)
    if xs.ndim != 4 or xs.shape[0] != len(sample_ids):
        raise ShapeMismatch("xs must be (N, C, H, W) matching sample_ids")
    rngs = [np.random.default_rng(derive_seed(seed, sid)) for sid in sample_ids]
    shape = tuple(xs.shape[1:])
    y = torch.stack(
        [
            torch.from_numpy(r.standard_normal(shape).astype(np.float64)).to(xs.dtype)
            for r in rngs
        ]
    )
    with torch.no_grad():
        for t in range(schedule.T, 0, -1):
            gamma_t = float(schedule.gamma[t - 1])
            alpha_t = float(schedule.alpha[t - 1])
            eps_hat = model(xs, y, gamma_t)
            coef = (1.0 - alpha_t) / math.sqrt(1.0 - gamma_t)
            y = (y - coef * eps_hat) / math.sqrt(alpha_t)
            if t > 1:
                z = torch.stack(
                    [
                        torch.from_numpy(
                            r.standard_normal(shape).astype(np.float64)
                        ).to(xs.dtype)
                        for r in rngs
                    ]
                )
                y = y + math.sqrt(1.0 - alpha_t) * z
    return y.clamp(-1.0, 1.0)
