"""Set-of-shapes performance criteria: IoU/GIoU distances, Hausdorff, EMD,
OSPA and OSPA on tracks, classical detection and tracking scores, and
ranking-based sanity experiments."""

from .geometry import (
    Shape,
    ShapeError,
    ShapeSet,
    augmented_distance,
    distance,
    giou_distance,
    iou_distance,
    volume,
)
from .setmetrics import (
    MetricConfig,
    Track,
    TrackSet,
    emd,
    emd_tracks,
    hausdorff,
    hausdorff_tracks,
    ospa,
    ospa2,
    ospa_unnormalized,
    track_base_distance,
)

__version__ = "0.1.0"

__all__ = [
    "MetricConfig",
    "Shape",
    "ShapeError",
    "ShapeSet",
    "Track",
    "TrackSet",
    "augmented_distance",
    "distance",
    "emd",
    "emd_tracks",
    "giou_distance",
    "hausdorff",
    "hausdorff_tracks",
    "iou_distance",
    "ospa",
    "ospa2",
    "ospa_unnormalized",
    "track_base_distance",
    "volume",
]
