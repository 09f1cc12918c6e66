from .losses import (
    combined_loss,
    contrastive_loss,
    contrastive_loss_logit_grad,
    classification_loss,
    classification_loss_from_logits,
    classification_loss_logit_grad,
    softmax,
)
from .network import DualHeadClassifier, build_classifier
from .distill import TeacherTarget, teacher_targets
from .train import TrainConfig, train_classifier, predict, predict_batch, load_classifier

__all__ = [
    "combined_loss",
    "contrastive_loss",
    "contrastive_loss_logit_grad",
    "classification_loss",
    "classification_loss_from_logits",
    "classification_loss_logit_grad",
    "softmax",
    "DualHeadClassifier",
    "build_classifier",
    "TeacherTarget",
    "teacher_targets",
    "TrainConfig",
    "train_classifier",
    "predict",
    "predict_batch",
    "load_classifier",
]
