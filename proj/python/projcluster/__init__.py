"""Long-term hand detection from per-frame detector output."""

from ._projcluster import (
    BBox,
    Detection,
    DetectionStream,
    FrameGeometry,
    PipelineConfig,
    Region,
    RegionSet,
    ScoredBox,
    NoContrastError,
    UndefinedMetricError,
    average_precision,
    connected_components,
    detect_hands,
    isodata_threshold,
    iou,
    nms,
    occlusion_scene,
    parse_stream,
    reduction_pct,
    run_cli,
    transform_box,
)

__all__ = [
    "BBox",
    "Detection",
    "DetectionStream",
    "FrameGeometry",
    "PipelineConfig",
    "Region",
    "RegionSet",
    "ScoredBox",
    "NoContrastError",
    "UndefinedMetricError",
    "average_precision",
    "connected_components",
    "detect_hands",
    "isodata_threshold",
    "iou",
    "nms",
    "occlusion_scene",
    "parse_stream",
    "reduction_pct",
    "run_cli",
    "transform_box",
]
