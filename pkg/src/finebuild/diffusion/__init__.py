from .schedule import NoiseSchedule, linear_schedule, sample_gamma, sample_gamma_batch
from .ops import (
    forward_noise,
    estimate_y0,
    posterior_mean,
    refine_step,
    super_resolve,
    super_resolve_batch,
)
from .correction import DomainStats, compute_domain_stats, correct_deviation
from .unet import ConditionalUNet, build_denoiser
from .train import training_step, train_denoiser, save_checkpoint, load_checkpoint

__all__ = [
    "NoiseSchedule",
    "linear_schedule",
    "sample_gamma",
    "sample_gamma_batch",
    "forward_noise",
    "estimate_y0",
    "posterior_mean",
    "refine_step",
    "super_resolve",
    "super_resolve_batch",
    "DomainStats",
    "compute_domain_stats",
    "correct_deviation",
    "ConditionalUNet",
    "build_denoiser",
    "training_step",
    "train_denoiser",
    "save_checkpoint",
    "load_checkpoint",
]
