"""Point-cloud kernels, collation, protocol aggregation and metrics.

Arrays are NumPy arrays: positions are float64 with shape (N, 3), labels are
integer arrays with -1 for ignored points.
"""

import json

from ._ptkit import (
    EstimationError,
    ParameterError,
    ParseError,
    ValidationError,
    aggregate_sphere_predictions,
    argmax_rows,
    box_iou_3d,
    class_balanced_weights,
    collate_dense,
    collate_partial_dense,
    collate_sparse,
    confusion_matrix,
    farthest_point_sampling,
    grid_subsample,
    inference_regions,
    knn_interpolate,
    knn_search,
    match_features,
    radius_search,
    ransac_rigid,
    registration_error,
    segmentation_scores,
    sphere_query,
    success_rate,
    vote_average,
)
from ._ptkit import _evaluate_detection_json


def evaluate_detection(records, thresholds=(0.25, 0.5)):
    """mAP per IoU threshold.

    ``records`` is a list of scenes, each ``{"predictions": [...], "ground_truth": [...]}``
    with boxes ``{"min": [x, y, z], "max": [x, y, z], "class": c, "score": s}``.
    Returns ``{threshold: (mAP, {class: AP})}``.
    """
    return _evaluate_detection_json(json.dumps(records), list(thresholds))


__all__ = [name for name in dir() if not name.startswith("_")]
