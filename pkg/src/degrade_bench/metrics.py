"""Quality and detection metrics: IoU, MSE/PSNR, match rates.

All functions here are pure and stateless; they can be called from any
number of workers concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PEAK_VALUE = 255  # 8-bit samples throughout the pipeline


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in continuous pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"inverted bounding box: ({self.x_min}, {self.y_min}, "
                f"{self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def clamped(self, width: float, height: float) -> "BoundingBox":
        """Clamp the box to the rectangle [0, width] x [0, height]."""
        return BoundingBox(
            x_min=min(max(self.x_min, 0.0), width),
            y_min=min(max(self.y_min, 0.0), height),
            x_max=min(max(self.x_max, 0.0), width),
            y_max=min(max(self.y_max, 0.0), height),
        )


@dataclass(frozen=True)
class QualityMeasurement:
    """Pixel-level degradation of a candidate against its reference.

    ``psnr_db`` is ``math.inf`` exactly when ``mse`` is zero (lossless).
    ``encoded_bytes`` is the size of the compressed intermediate that produced
    the candidate; 0 when not applicable.
    """

    mse: float
    psnr_db: float
    encoded_bytes: int = 0

    def __post_init__(self) -> None:
        if self.mse < 0:
            raise ValueError(f"negative mse: {self.mse}")
        if (self.mse == 0) != math.isinf(self.psnr_db):
            raise ValueError("psnr_db must be infinite exactly when mse == 0")
        if self.encoded_bytes < 0:
            raise ValueError(f"negative encoded_bytes: {self.encoded_bytes}")

    @property
    def lossless(self) -> bool:
        return self.mse == 0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1].

    Returns 0 when the union has zero area (two degenerate boxes), so a
    zero-area prediction never counts as a match.
    """
    inter_w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    inter_h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(inter_w, 0.0) * max(inter_h, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _as_sample_array(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {arr.dtype}")
    return arr


def mse(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Mean squared error over all pixels and channels, on the 8-bit scale."""
    ref = _as_sample_array(reference)
    cand = _as_sample_array(candidate)
    if ref.shape != cand.shape:
        raise ValueError(f"image shape mismatch: {ref.shape} vs {cand.shape}")
    diff = ref.astype(np.int64) - cand.astype(np.int64)
    return float(np.mean(diff * diff))


def psnr(reference: np.ndarray, candidate: np.ndarray) -> QualityMeasurement:
    """Peak signal-to-noise ratio in dB, with peak fixed at 255.

    Identical images yield the infinite marker rather than a numeric value.
    """
    error = mse(reference, candidate)
    if error == 0.0:
        return QualityMeasurement(mse=0.0, psnr_db=math.inf)
    value = 10.0 * math.log10(PEAK_VALUE * PEAK_VALUE / error)
    return QualityMeasurement(mse=error, psnr_db=value)


def match_rate(records, iou_threshold: float) -> float:
    """Fraction of records whose IoU meets the threshold (inclusive).

    ``records`` may be bare IoU floats or any objects with an ``iou``
    attribute (e.g. evaluation records). Raises on empty input: a rate over
    nothing is undefined.
    """
    ious = [getattr(r, "iou", r) for r in records]
    if not ious:
        raise ValueError("match_rate is undefined for an empty record set")
    hits = sum(1 for v in ious if v >= iou_threshold)
    return hits / len(ious)
