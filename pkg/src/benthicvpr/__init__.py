"""Footprint-overlap ground truth and place-recognition evaluation for seafloor imagery."""

from .color import CorrectionTargets, PixelStats, StatsAccumulator, accumulate_stats, correct_image
from .errors import DataError
from .footprint import (
    CornerRangeSpec,
    Footprint2D,
    Footprint3D,
    corner_ranges,
    estimate_footprint,
    flatten,
    intersection_area,
    iou,
)
from .fusion import FusionParams, RangeMap, ScaleOffset, apply_mask, fit_scale_offset, fuse, mask_ranges
from .geodesy import GeodeticPoint, LocalFrame, global_to_local, local_to_global
from .geometry import (
    CameraView,
    ErrorStats,
    Intrinsics,
    RigidTransform,
    SimilarityTransform,
    inverse_project,
    project,
    registration_error_stats,
    umeyama_align,
)
from .linking import (
    Link,
    LinkSet,
    ThresholdModel,
    VisitPair,
    build_footprint_links,
    build_location_links,
    conservative_iou_threshold,
    distance_threshold_p95,
    link_stats,
)
from .polygon import BACKEND as POLYGON_BACKEND
from .retrieval import DescriptorSet, EvalReport, RetrievalResult, evaluate, ir_recall_at_k, recall_at_k, retrieve, top_k

__version__ = "0.1.0"
