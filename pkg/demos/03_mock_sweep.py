"""
End-to-end mock benchmark run
=============================

Builds a tiny synthetic KITTI-style dataset in a temp directory, then runs
the whole pipeline with the built-in mocks: convert-labels -> baseline ->
sweep -> report. No real codec or detector needed.
"""

import tempfile
from pathlib import Path

import numpy as np

from degrade_bench import imgio
from degrade_bench.cli import main
from degrade_bench.results import RecordStore

root = Path(tempfile.mkdtemp(prefix="degrade-bench-demo-"))
images_dir = root / "image_2"
labels_dir = root / "label_2"
images_dir.mkdir(parents=True)
labels_dir.mkdir(parents=True)

# Three frames, each with one pedestrian label (plus a Car on frame 2).
for frame_id in range(3):
    stem = f"{frame_id:06d}"
    row = (np.arange(256) % 256).astype(np.uint8)
    image = np.repeat(np.repeat(row[None, :], 64, axis=0)[:, :, None], 3, axis=2)
    imgio.save_image(images_dir / f"{stem}.png", image)
    x1 = 40 + 10 * frame_id
    lines = [
        f"Pedestrian 0.00 0 -0.20 {x1} 8.0 {x1 + 50} 56.0 1.89 0.48 1.20 1.84 1.47 8.41 0.01"
    ]
    if frame_id == 2:
        lines.append("Car 0.00 0 0.0 150 10 200 40 1.5 1.6 3.9 2.0 1.6 20.0 0.0")
    (labels_dir / f"{stem}.txt").write_text("\n".join(lines) + "\n")

# A complete run configuration. The noisy mock detector jitters the ground
# truth deterministically (per seed), so reruns reproduce the same records.
config_path = root / "run.toml"
config_path.write_text(f"""
[dataset]
images = "{images_dir}"
labels = "{labels_dir}"

[output]
dir = "{root / 'out'}"

[sweep]
codecs = ["mock_identity", "mock_quantizer"]
crf = "0..51"
colorspaces = ["rgb", "grayscale"]

[detector]
mode = "noisy"
noise_px = 14.0

[run]
workers = 2
seed = 7
""")

for command in ("convert-labels", "baseline", "sweep", "report"):
    code = main([command, "--config", str(config_path)])
    assert code == 0, f"{command} failed"

store = RecordStore.open(root / "out")
records = store.records()
degraded = [r for r in records if not r.condition.is_baseline]
print(f"\nrecords: {len(records)} total, {len(degraded)} degraded")
print("report files:")
for path in sorted((root / "out" / "report").iterdir()):
    print("  ", path)

# Peek at the summary: per codec/colorspace, the best CRF and its match rate.
import csv

with open(root / "out" / "report" / "summary.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        print(
            f"{row['codec']:>15} {row['colorspace']:>9}: baseline "
            f"{float(row['baseline_match_rate']):.3f}, best crf {row['best_crf']} "
            f"-> {float(row['best_match_rate']):.3f}, crf51 -> "
            f"{float(row['worst_match_rate']):.3f}"
        )
