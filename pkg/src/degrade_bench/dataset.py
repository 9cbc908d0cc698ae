"""KITTI object labels, YOLO annotations, and evaluation-subset selection.

KITTI label files carry one object per line as 15 whitespace-separated
fields. Labels are matched to images by identical file stems (the usual
zero-padded numeric id). Everything in this module is a pure function over
immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .metrics import BoundingBox

PEDESTRIAN = "Pedestrian"

# Only pedestrians are evaluated; extend via configuration when needed.
DEFAULT_CLASS_MAP: Mapping[str, int] = {PEDESTRIAN: 0}

KITTI_FIELD_COUNT = 15


class LabelParseError(ValueError):
    """Raised for a malformed KITTI label line, naming the line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class KittiObjectLabel:
    """One object from a KITTI label file, fields in file order.

    Range checks are deliberately lenient: real KITTI files use -1 for
    truncation/occlusion on DontCare objects.
    """

    object_class: str
    truncation: float
    occlusion: int
    alpha: float
    bbox: BoundingBox
    dimensions_hwl: tuple[float, float, float]
    location_xyz: tuple[float, float, float]
    rotation_y: float

    def to_line(self) -> str:
        """Format back to a 15-field line; reparsing yields an equal label."""
        fields = [
            self.object_class,
            repr(self.truncation),
            str(self.occlusion),
            repr(self.alpha),
            repr(self.bbox.x_min),
            repr(self.bbox.y_min),
            repr(self.bbox.x_max),
            repr(self.bbox.y_max),
            *(repr(v) for v in self.dimensions_hwl),
            *(repr(v) for v in self.location_xyz),
            repr(self.rotation_y),
        ]
        return " ".join(fields)


@dataclass(frozen=True)
class ImageFrame:
    """One dataset image; 8-bit, 3 channels."""

    frame_id: int
    width: int
    height: int
    source_path: Path
    channels: int = 3

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise ValueError(f"negative frame_id: {self.frame_id}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"non-positive frame size: {self.width}x{self.height}")

    @property
    def stem(self) -> str:
        return Path(self.source_path).stem


@dataclass(frozen=True)
class YoloAnnotation:
    """Normalized center/size box plus class id, all fractions of the frame."""

    class_id: int
    x_center: float
    y_center: float
    box_width: float
    box_height: float

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"negative class_id: {self.class_id}")
        for name in ("x_center", "y_center", "box_width", "box_height"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def to_line(self) -> str:
        return (
            f"{self.class_id} {self.x_center:.6f} {self.y_center:.6f} "
            f"{self.box_width:.6f} {self.box_height:.6f}"
        )


def _parse_line(line: str, line_number: int) -> KittiObjectLabel:
    fields = line.split()
    if len(fields) != KITTI_FIELD_COUNT:
        raise LabelParseError(
            line_number,
            f"expected {KITTI_FIELD_COUNT} fields, got {len(fields)}",
        )
    try:
        numbers = [float(f) for f in fields[1:]]
    except ValueError as exc:
        raise LabelParseError(line_number, f"non-numeric field: {exc}") from None
    try:
        bbox = BoundingBox(*numbers[3:7])
    except ValueError as exc:
        raise LabelParseError(line_number, str(exc)) from None
    return KittiObjectLabel(
        object_class=fields[0],
        truncation=numbers[0],
        occlusion=int(numbers[1]),
        alpha=numbers[2],
        bbox=bbox,
        dimensions_hwl=(numbers[7], numbers[8], numbers[9]),
        location_xyz=(numbers[10], numbers[11], numbers[12]),
        rotation_y=numbers[13],
    )


def parse_kitti_label_file(text: str) -> list[KittiObjectLabel]:
    """Parse label-file contents, one label per non-empty line.

    Malformed lines raise :class:`LabelParseError` naming the 1-based line
    number; nothing is silently skipped.
    """
    labels = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        labels.append(_parse_line(line, line_number))
    return labels


def convert_to_yolo(
    label: KittiObjectLabel,
    frame: ImageFrame,
    class_map: Mapping[str, int] = DEFAULT_CLASS_MAP,
) -> YoloAnnotation:
    """Convert a KITTI label to the normalized YOLO annotation format.

    Boxes reaching past the frame edges are clamped to the image bounds
    before normalization, so outputs always satisfy the [0, 1] invariants.
    """
    if label.object_class not in class_map:
        raise KeyError(f"class {label.object_class!r} not in class map")
    box = label.bbox.clamped(frame.width, frame.height)
    return YoloAnnotation(
        class_id=class_map[label.object_class],
        x_center=(box.x_min + box.x_max) / (2.0 * frame.width),
        y_center=(box.y_min + box.y_max) / (2.0 * frame.height),
        box_width=(box.x_max - box.x_min) / frame.width,
        box_height=(box.y_max - box.y_min) / frame.height,
    )


def invert_yolo(ann: YoloAnnotation, frame: ImageFrame) -> BoundingBox:
    """Map a normalized annotation back to pixel coordinates.

    Exact algebraic inverse of :func:`convert_to_yolo` (pre-clamping).
    """
    half_w = ann.box_width * frame.width / 2.0
    half_h = ann.box_height * frame.height / 2.0
    cx = ann.x_center * frame.width
    cy = ann.y_center * frame.height
    return BoundingBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)


def select_single_pedestrian_frames(
    frames_with_labels: Iterable[tuple[ImageFrame, Sequence[KittiObjectLabel]]],
) -> list[ImageFrame]:
    """Frames whose label set contains exactly one Pedestrian object.

    Other classes (Car, DontCare, Person_sitting, ...) do not disqualify a
    frame; only the Pedestrian count matters. Output is ordered by frame_id.
    """
    selected = []
    for frame, labels in frames_with_labels:
        pedestrians = sum(1 for lb in labels if lb.object_class == PEDESTRIAN)
        if pedestrians == 1:
            selected.append(frame)
    return sorted(selected, key=lambda f: f.frame_id)


def format_yolo_annotation_file(annotations: Iterable[YoloAnnotation]) -> str:
    """One annotation per line; 6 decimal places, space-separated."""
    lines = [ann.to_line() for ann in annotations]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_yolo_annotation_file(text: str) -> list[YoloAnnotation]:
    annotations = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise LabelParseError(line_number, f"expected 5 fields, got {len(fields)}")
        try:
            annotations.append(
                YoloAnnotation(
                    class_id=int(fields[0]),
                    x_center=float(fields[1]),
                    y_center=float(fields[2]),
                    box_width=float(fields[3]),
                    box_height=float(fields[4]),
                )
            )
        except ValueError as exc:
            raise LabelParseError(line_number, str(exc)) from None
    return annotations
