"""
The detector wire protocol
==========================

External detectors are separate processes speaking JSON Lines over
stdin/stdout. This demo writes a minimal detector server to a temp file,
drives it through DetectorHandle, and matches its output against a ground
truth box.
"""

import sys
import tempfile
from pathlib import Path

from degrade_bench import BoundingBox, DetectorHandle, match_single_ground_truth

# A complete, valid detector server: answer the handshake, then respond to
# every request with one fixed "person" detection.
SERVER = '''
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    if req.get("type") == "handshake":
        print(json.dumps({"type": "handshake", "version": "degrade-bench/1",
                          "detector": {"name": "demo-detector"}}), flush=True)
        continue
    response = {"id": req["id"], "detections": [
        {"class": "person", "x_min": 12.0, "y_min": 5.0,
         "x_max": 61.0, "y_max": 58.0, "confidence": 0.87},
    ]}
    print(json.dumps(response), flush=True)
'''

server_path = Path(tempfile.mkdtemp(prefix="degrade-bench-demo-")) / "server.py"
server_path.write_text(SERVER)

handle = DetectorHandle([sys.executable, str(server_path)], timeout=10)
try:
    detections = handle.detect("/some/frame.png", request_id="demo-1")
    print("handshake metadata:", handle.handshake_info["detector"])
    print("detections:", detections)

    # The pipeline maps detector classes onto dataset classes (person ->
    # Pedestrian) and picks the max-IoU detection above the confidence bar.
    gt = BoundingBox(10, 4, 60, 60)
    result = match_single_ground_truth(
        detections, gt, target_class="person", conf_threshold=0.5, iou_threshold=0.5
    )
    print(f"matched: {result.matched}, IoU {result.iou:.3f}, "
          f"confidence {result.confidence}")
finally:
    handle.shutdown()
