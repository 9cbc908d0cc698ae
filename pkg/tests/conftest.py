import sys
from pathlib import Path

import numpy as np
import pytest

from degrade_bench import imgio

TESTS_DIR = Path(__file__).parent

# (frame_id, height, extra label lines beyond the single pedestrian)
# Frame 5 carries a second pedestrian, so selection drops it: 5 of 6 qualify.
DEFAULT_FRAME_SPECS = [
    (0, 48, []),
    (1, 56, []),
    (2, 64, ["Car", "DontCare"]),
    (3, 72, []),
    (4, 80, ["Person_sitting"]),
    (5, 64, ["Pedestrian"]),
]


def ramp_frame(height: int, width: int = 256) -> np.ndarray:
    """Gray frame whose rows are exact 0..255 unit ramps.

    Under the quantizer mock, runs in this pattern can only merge as the
    step grows, so encoded_bytes decreases monotonically by construction.
    """
    row = (np.arange(width) % 256).astype(np.uint8)
    plane = np.repeat(row[None, :], height, axis=0)
    return np.repeat(plane[:, :, None], 3, axis=2)


def noise_frame(rng: np.random.Generator, height: int = 64, width: int = 96) -> np.ndarray:
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def kitti_line(cls: str, x1, y1, x2, y2) -> str:
    return f"{cls} 0.00 0 -0.20 {x1} {y1} {x2} {y2} 1.89 0.48 1.20 1.84 1.47 8.41 0.01"


def pedestrian_box(frame_id: int, height: int) -> tuple[float, float, float, float]:
    x1 = 40.0 + 6 * frame_id
    return (x1, 8.0, x1 + 52.0, height - 8.0)


def build_kitti_dataset(root: Path, frame_specs=DEFAULT_FRAME_SPECS) -> tuple[Path, Path]:
    """Write a synthetic KITTI-style dataset (PNG images + label txt files)."""
    images_dir = root / "image_2"
    labels_dir = root / "label_2"
    images_dir.mkdir(parents=True, exist_ok=True)
    labels_dir.mkdir(parents=True, exist_ok=True)
    for frame_id, height, extras in frame_specs:
        stem = f"{frame_id:06d}"
        imgio.save_image(images_dir / f"{stem}.png", ramp_frame(height))
        x1, y1, x2, y2 = pedestrian_box(frame_id, height)
        lines = [kitti_line("Pedestrian", x1, y1, x2, y2)]
        for index, cls in enumerate(extras):
            off = 10.0 * (index + 1)
            lines.append(kitti_line(cls, 100.0 + off, 4.0 + off, 140.0 + off, 30.0 + off))
        (labels_dir / f"{stem}.txt").write_text("\n".join(lines) + "\n")
    return images_dir, labels_dir


def write_config(
    path: Path,
    images_dir: Path,
    labels_dir: Path,
    output_dir: Path,
    *,
    codecs=("mock_identity", "mock_quantizer"),
    crf="0..51",
    colorspaces=("rgb", "grayscale"),
    detector_lines=('mode = "echo_gt"',),
    workers: int = 2,
    seed: int = 0,
    extra: str = "",
) -> Path:
    codecs_list = ", ".join(f'"{c}"' for c in codecs)
    colorspace_list = ", ".join(f'"{c}"' for c in colorspaces)
    detector_block = "\n".join(detector_lines)
    path.write_text(
        f"""
[dataset]
images = "{images_dir}"
labels = "{labels_dir}"

[output]
dir = "{output_dir}"

[sweep]
codecs = [{codecs_list}]
crf = "{crf}"
colorspaces = [{colorspace_list}]

[detector]
{detector_block}

[run]
workers = {workers}
seed = {seed}
{extra}
"""
    )
    return path


@pytest.fixture
def synth_dataset(tmp_path):
    images_dir, labels_dir = build_kitti_dataset(tmp_path / "kitti")
    return images_dir, labels_dir


def python_cmd(script: Path, *args: str) -> str:
    return " ".join([sys.executable, str(script), *args])


def stub_codec_templates(*, mode: str = "copy") -> tuple[str, str]:
    """Command templates for the external stub codec used in tests."""
    script = TESTS_DIR / "stub_codec.py"
    encode = python_cmd(script, "encode", "{input}", "{output}", "--crf", "{crf}", "--mode", mode)
    decode = python_cmd(script, "decode", "{input}", "{output}")
    return encode, decode


def proto_server_cmd(*args: str) -> list[str]:
    return [sys.executable, str(TESTS_DIR / "proto_server.py"), *args]
