"""degrade-bench: detector robustness under lossy video-codec degradation.

The pipeline converts KITTI labels to YOLO annotations, selects the
single-pedestrian evaluation subset, establishes a detector baseline, sweeps
a codec x CRF x colorspace grid of degradation candidates, and reports
IoU/PSNR metrics and match-rate summaries.
"""

from .dataset import (
    ImageFrame,
    KittiObjectLabel,
    YoloAnnotation,
    convert_to_yolo,
    invert_yolo,
    parse_kitti_label_file,
    select_single_pedestrian_frames,
)
from .degradation import (
    CommandCodec,
    DegradationCandidate,
    IdentityCodec,
    QuantizerCodec,
    SweepPlan,
    grayscale_roundtrip,
    plan_sweep,
    run_sweep,
)
from .detector import (
    Detection,
    DetectorHandle,
    MatchResult,
    MockDetector,
    PROTOCOL_VERSION,
    match_single_ground_truth,
)
from .metrics import BoundingBox, QualityMeasurement, iou, match_rate, mse, psnr
from .results import (
    Condition,
    EvaluationRecord,
    RecordStore,
    RunManifest,
    render_report,
    sorted_iou_curve,
    summarize,
)

__all__ = [
    "BoundingBox",
    "CommandCodec",
    "Condition",
    "DegradationCandidate",
    "Detection",
    "DetectorHandle",
    "EvaluationRecord",
    "IdentityCodec",
    "ImageFrame",
    "KittiObjectLabel",
    "MatchResult",
    "MockDetector",
    "PROTOCOL_VERSION",
    "QualityMeasurement",
    "QuantizerCodec",
    "RecordStore",
    "RunManifest",
    "SweepPlan",
    "YoloAnnotation",
    "convert_to_yolo",
    "grayscale_roundtrip",
    "invert_yolo",
    "iou",
    "match_rate",
    "match_single_ground_truth",
    "mse",
    "parse_kitti_label_file",
    "plan_sweep",
    "psnr",
    "render_report",
    "run_sweep",
    "select_single_pedestrian_frames",
    "sorted_iou_curve",
    "summarize",
]

__version__ = "0.1.0"
