"""Tri-point line segment maps.

Ground-truth encoding, map decoding, training losses with analytic
gradients, evaluation metrics, wire formats, and a decode benchmark for
tri-point line segment detection pipelines.
"""

from .backend import available_backends, default_backend
from .decode import DecodeConfig, ScoredCenter, extract_centers, generate_lines, local_max_nms
from .geometry import (
    ImageGeometry,
    LineSegment,
    Point,
    affine_augment,
    base_subpart_length,
    canonicalize,
    internal_points,
    length_and_degree,
    sol_split,
)
from .loss import (
    LossValue,
    MatchSet,
    PredBundle,
    masked_smooth_l1,
    match_lines,
    matching_loss,
    separated_bce,
    total_loss,
    tp_loss,
)
from .maps import (
    GtBundle,
    MapStack,
    SegMaps,
    build_gt,
    encode_center,
    encode_displacement,
    encode_length_degree,
    encode_segmentation,
    encode_tp_stack,
)
from .metrics import EvalReport, ap_from_pr, evaluate, evaluate_dataset, heatmap_fscore, structural_ap

__version__ = "0.1.0"
