"""Diffusion noise bookkeeping.

A schedule of T steps carries beta_t (per-step noise rate), alpha_t =
1 - beta_t, the cumulative signal retention gamma_t = prod_{s<=t} alpha_s,
and the reverse-step variance sigma_t^2 = 1 - alpha_t. Noise levels for
training are drawn piecewise-uniformly: t uniform on {1..T}, then gamma
uniform on (gamma_t, gamma_{t-1}) with gamma_0 := 1, so the denoiser is
conditioned on a continuous noise level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidSchedule
from ..hashing import fnv1a64


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta_start: float
    beta_end: float
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    sigma2: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.beta.shape != (self.T,):
            raise InvalidSchedule("beta length must equal T")
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise InvalidSchedule("beta values must lie strictly in (0, 1)")
        if np.any(np.diff(self.beta) < 0):
            raise InvalidSchedule("beta must be nondecreasing")
        if self.T > 1 and np.any(np.diff(self.gamma) >= 0):
            raise InvalidSchedule("gamma must be strictly decreasing")

    def gamma_at(self, t: int) -> float:
        """gamma_t with the gamma_0 := 1 convention; t in [0, T]."""
        if not 0 <= t <= self.T:
            raise InvalidSchedule(f"t={t} outside [0, {self.T}]")
        return 1.0 if t == 0 else float(self.gamma[t - 1])

    @property
    def schedule_hash(self) -> int:
        """64-bit FNV-1a over the decimal rendering 'T;beta_start;beta_end'.

        Floats render via repr() (shortest decimal that round-trips).
        """
        return fnv1a64(f"{self.T};{self.beta_start!r};{self.beta_end!r}")


def linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Betas linearly spaced from beta_start to beta_end inclusive."""
    if T < 1:
        raise InvalidSchedule(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise InvalidSchedule(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    gamma = np.cumprod(alpha)
    sigma2 = 1.0 - alpha
    return NoiseSchedule(
        T=T, beta_start=beta_start, beta_end=beta_end,
        beta=beta, alpha=alpha, gamma=gamma, sigma2=sigma2,
    )


def sample_gamma(schedule: NoiseSchedule, rng: np.random.Generator) -> tuple[int, float]:
    """Draw one (t, gamma) pair: t uniform on {1..T}, gamma uniform on
    (gamma_t, gamma_{t-1})."""
    t = int(rng.integers(1, schedule.T + 1))
    low = schedule.gamma_at(t)
    high = schedule.gamma_at(t - 1)
    return t, float(rng.uniform(low, high))


def sample_gamma_batch(
    schedule: NoiseSchedule, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized draw of n (t, gamma) pairs.

    Consumes the rng differently from n scalar sample_gamma calls; the
    training loop uses this path exclusively, so its stream stays
    reproducible under a fixed seed.
    """
    ts = rng.integers(1, schedule.T + 1, size=n)
    lows = schedule.gamma[ts - 1]
    highs = np.where(ts > 1, schedule.gamma[np.maximum(ts - 2, 0)], 1.0)
    gammas = rng.uniform(lows, highs)
    return ts, gammas
