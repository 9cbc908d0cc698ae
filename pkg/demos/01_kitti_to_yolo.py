"""
KITTI labels to YOLO annotations
================================

Parse a raw KITTI object-label line, normalize it to the YOLO format, and
invert it back to pixel coordinates.
"""

from pathlib import Path

from degrade_bench import (
    ImageFrame,
    convert_to_yolo,
    invert_yolo,
    parse_kitti_label_file,
    select_single_pedestrian_frames,
)

# A KITTI label line has 15 whitespace-separated fields; the bounding box
# lives in fields 5..8 (left, top, right, bottom, in pixels).
raw = (
    "Pedestrian 0.00 0 -0.20 712.40 143.00 810.73 307.92 "
    "1.89 0.48 1.20 1.84 1.47 8.41 0.01"
)
label = parse_kitti_label_file(raw)[0]
print("class:", label.object_class)
print("pixel box:", label.bbox)

# Normalization needs the frame dimensions. 1242x375 is the usual KITTI size.
frame = ImageFrame(frame_id=0, width=1242, height=375, source_path=Path("000000.png"))
ann = convert_to_yolo(label, frame)
print("yolo line:", ann.to_line())

# The inverse recovers the pixel box (exactly, up to float rounding).
box = invert_yolo(ann, frame)
print("recovered box:", box)
print("max drift (px):", max(
    abs(box.x_min - label.bbox.x_min),
    abs(box.y_min - label.bbox.y_min),
    abs(box.x_max - label.bbox.x_max),
    abs(box.y_max - label.bbox.y_max),
))

# Subset selection keeps frames with exactly one pedestrian; other classes
# on the same frame do not disqualify it.
car = raw.replace("Pedestrian", "Car")
two_peds = raw + "\n" + raw
frames = [
    (frame, parse_kitti_label_file(raw + "\n" + car)),           # selected
    (ImageFrame(1, 1242, 375, Path("000001.png")), parse_kitti_label_file(two_peds)),
    (ImageFrame(2, 1242, 375, Path("000002.png")), parse_kitti_label_file(car)),
]
subset = select_single_pedestrian_frames(frames)
print("selected frame ids:", [f.frame_id for f in subset])
