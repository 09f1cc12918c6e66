from .config import DEFAULTS, load_config, save_config
from .pipelines import (
    cmd_ablate,
    cmd_cibm_weights,
    cmd_eval,
    cmd_report,
    cmd_super_resolve,
    cmd_synth,
    cmd_train_cls,
    cmd_train_sr,
)

__all__ = [
    "DEFAULTS",
    "load_config",
    "save_config",
    "cmd_ablate",
    "cmd_cibm_weights",
    "cmd_eval",
    "cmd_report",
    "cmd_super_resolve",
    "cmd_synth",
    "cmd_train_cls",
    "cmd_train_sr",
]
