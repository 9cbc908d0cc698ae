"""Loading and saving of 8-bit RGB frames.

Candidate images are stored as lossless PNG so downstream consumers see
exactly the decoded pixels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def load_image(path: Path | str) -> np.ndarray:
    """Read an image as an uint8 H x W x 3 array (converted to RGB)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(path: Path | str, image: np.ndarray) -> None:
    """Write an uint8 H x W x 3 array as PNG, creating parent directories."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected uint8 HxWx3 image, got {arr.dtype} {arr.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def image_size(path: Path | str) -> tuple[int, int]:
    """Return (width, height) without decoding pixel data."""
    with Image.open(path) as img:
        return img.size
