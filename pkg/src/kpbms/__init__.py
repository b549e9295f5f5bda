"""Keypoint-seeded Boolean map saliency and automatic bounding-box annotation."""

from .bbox import BoundingBox, BoxSet
from .generation import candidate_boxes, extract_blobs, generate, select_combination
from .imaging import (
    Keypoint,
    KeypointClass,
    KeypointSet,
    as_gray_image,
    connected_components,
    flood_fill,
    intensity_at,
    threshold,
)
from .metrics import EvalReport, aggregate, evaluate, format_table, match
from .saliency import (
    SaliencyConfig,
    activation_bms_baseline,
    activation_combined,
    activation_keypoint,
    bms_saliency,
    mean_attention,
    normalize_activation,
    sample_thresholds,
    saliency_for_keypoint,
    saliency_per_class,
)
from .tuner import SearchSpace, Trial, objective, random_search, tpe_search

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "BoxSet",
    "candidate_boxes",
    "extract_blobs",
    "generate",
    "select_combination",
    "Keypoint",
    "KeypointClass",
    "KeypointSet",
    "as_gray_image",
    "connected_components",
    "flood_fill",
    "intensity_at",
    "threshold",
    "EvalReport",
    "aggregate",
    "evaluate",
    "format_table",
    "match",
    "SaliencyConfig",
    "activation_bms_baseline",
    "activation_combined",
    "activation_keypoint",
    "bms_saliency",
    "mean_attention",
    "normalize_activation",
    "sample_thresholds",
    "saliency_for_keypoint",
    "saliency_per_class",
    "SearchSpace",
    "Trial",
    "objective",
    "random_search",
    "tpe_search",
]
