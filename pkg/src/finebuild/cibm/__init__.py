from .teacher import FrozenTeacher, build_teacher
from .features import FeatureMatrix, extract_features, resize_for_teacher
from .weights import (
    CategoryWeightTable,
    DistanceMatrix,
    cibm_weights,
    compute_spreads,
    distance_matrix,
    frequency_weights,
    build_weight_table,
)
from .sampler import weighted_sampler
from .report import intra_class_spread_report

__all__ = [
    "FrozenTeacher",
    "build_teacher",
    "FeatureMatrix",
    "extract_features",
    "resize_for_teacher",
    "CategoryWeightTable",
    "DistanceMatrix",
    "cibm_weights",
    "compute_spreads",
    "distance_matrix",
    "frequency_weights",
    "build_weight_table",
    "weighted_sampler",
    "intra_class_spread_report",
]
