from .classification import (
    EvaluationReport,
    PerClassMetrics,
    build_report,
    confusion,
    precision_recall_f1,
    topk_accuracy,
)
from .image import psnr, ssim, consistency

__all__ = [
    "EvaluationReport",
    "PerClassMetrics",
    "build_report",
    "confusion",
    "precision_recall_f1",
    "topk_accuracy",
    "psnr",
    "ssim",
    "consistency",
]
