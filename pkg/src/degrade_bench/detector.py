"""Pluggable detector drivers and ground-truth matching.

External detectors speak a JSON Lines protocol over stdin/stdout: the client
opens with a handshake line announcing version ``degrade-bench/1``, then
sends one request object per line ``{"id": ..., "image_path": ...}`` and
reads one response per request ``{"id": ..., "detections": [...]}``. Each
detection carries ``class``, ``x_min``, ``y_min``, ``x_max``, ``y_max``,
``confidence`` in candidate-image pixel coordinates. Images pass by path to
keep the protocol small.

A handle owns one subprocess and allows one in-flight request; parallelism
comes from running multiple handles, one per worker.
"""

from __future__ import annotations

import hashlib
import json
import queue
import subprocess
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .metrics import BoundingBox, iou

PROTOCOL_VERSION = "degrade-bench/1"

DEFAULT_CONF_THRESHOLD = 0.5
DEFAULT_IOU_THRESHOLD = 0.5

MOCK_MODES = ("echo_gt", "offset", "noisy", "silent")


@dataclass(frozen=True)
class Detection:
    """One detector output in candidate-image pixel coordinates."""

    class_name: str
    box: BoundingBox
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching detections against the single ground-truth box.

    ``confidence`` and ``chosen_index`` are absent exactly when no detection
    was eligible (so iou is 0 and matched is false).
    """

    matched: bool
    iou: float
    confidence: float | None = None
    chosen_index: int | None = None


def match_single_ground_truth(
    detections: Sequence[Detection],
    gt_box: BoundingBox,
    target_class: str = "Pedestrian",
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchResult:
    """Pick the best eligible detection and compare it to the ground truth.

    Eligible means matching class and confidence at or above the threshold.
    Among those, the maximum-IoU detection wins; ties go to the higher
    confidence, then the lower original index. Detections of other classes
    never influence the result.
    """
    best: tuple[float, float, int] | None = None
    for index, det in enumerate(detections):
        if det.class_name != target_class or det.confidence < conf_threshold:
            continue
        overlap = iou(det.box, gt_box)
        # Ranking: higher IoU, then higher confidence, then lower index.
        candidate = (overlap, det.confidence, -index)
        if best is None or candidate > best:
            best = candidate
    if best is None:
        return MatchResult(matched=False, iou=0.0)
    overlap, confidence, neg_index = best
    return MatchResult(
        matched=overlap >= iou_threshold,
        iou=overlap,
        confidence=confidence,
        chosen_index=-neg_index,
    )


class DetectorError(RuntimeError):
    """Detector failure (timeout, malformed response, process death)."""

    def __init__(self, request_id: str, message: str):
        super().__init__(f"request {request_id!r}: {message}")
        self.request_id = request_id


class _LineReader(threading.Thread):
    """Drain a pipe into a queue so reads can time out."""

    def __init__(self, stream):
        super().__init__(daemon=True)
        self.stream = stream
        self.lines: queue.Queue[str | None] = queue.Queue()
        self.start()

    def run(self) -> None:
        try:
            for line in self.stream:
                self.lines.put(line)
        except ValueError:
            pass  # stream closed underneath us
        self.lines.put(None)

    def get(self, timeout: float) -> str:
        try:
            line = self.lines.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError(f"no response within {timeout}s") from None
        if line is None:
            raise EOFError("detector closed its output stream")
        return line


class _StderrCollector(threading.Thread):
    """Keep the tail of the detector's stderr for diagnostics."""

    def __init__(self, stream, max_lines: int = 40):
        super().__init__(daemon=True)
        self.stream = stream
        self.tail: deque[str] = deque(maxlen=max_lines)
        self.start()

    def run(self) -> None:
        try:
            for line in self.stream:
                self.tail.append(line.rstrip("\n"))
        except ValueError:
            pass


class DetectorHandle:
    """One detector subprocess with one in-flight request at a time.

    The process is spawned lazily and restarted after failures, with a
    bounded number of retries per request. Per-request error responses from
    a healthy server are raised immediately without a restart.
    """

    def __init__(
        self,
        command: Sequence[str],
        *,
        timeout: float = 30.0,
        retries: int = 2,
    ):
        self.command = list(command)
        self.timeout = timeout
        self.retries = retries
        self._process: subprocess.Popen | None = None
        self._reader: _LineReader | None = None
        self._stderr: _StderrCollector | None = None
        self._lock = threading.Lock()
        self.handshake_info: dict = {}

    @property
    def healthy(self) -> bool:
        return self._process is not None and self._process.poll() is None

    def _spawn(self) -> None:
        self.shutdown()
        try:
            self._process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise DetectorError("handshake", f"failed to launch {self.command}: {exc}")
        self._reader = _LineReader(self._process.stdout)
        self._stderr = _StderrCollector(self._process.stderr)
        self._send({"type": "handshake", "version": PROTOCOL_VERSION})
        response = self._receive()
        if response.get("version") != PROTOCOL_VERSION:
            raise ValueError(f"unexpected handshake response: {response}")
        self.handshake_info = response

    def _send(self, obj: dict) -> None:
        assert self._process is not None and self._process.stdin is not None
        self._process.stdin.write(json.dumps(obj) + "\n")
        self._process.stdin.flush()

    def _receive(self) -> dict:
        assert self._reader is not None
        line = self._reader.get(self.timeout)
        response = json.loads(line)
        if not isinstance(response, dict):
            raise ValueError(f"expected a JSON object, got: {line.strip()[:200]}")
        return response

    def _stderr_tail(self) -> str:
        if self._stderr is None:
            return ""
        return "\n".join(self._stderr.tail)

    def detect(self, image_path: Path | str, request_id: str) -> list[Detection]:
        """Run one detection request, restarting the process on failure."""
        with self._lock:
            last_error: Exception | None = None
            for _ in range(self.retries + 1):
                try:
                    if not self.healthy:
                        self._spawn()
                    self._send({"id": request_id, "image_path": str(image_path)})
                    response = self._receive()
                    if response.get("id") != request_id:
                        raise ValueError(
                            f"response id {response.get('id')!r} does not match"
                        )
                    if "error" in response:
                        # The server handled the request and reported a
                        # per-request failure; retrying cannot help.
                        raise DetectorError(request_id, str(response["error"]))
                    return _parse_detections(response)
                except DetectorError:
                    raise
                except (
                    TimeoutError,
                    EOFError,
                    OSError,
                    ValueError,
                    json.JSONDecodeError,
                ) as exc:
                    last_error = exc
                    self.shutdown()
            detail = self._stderr_tail()
            message = f"{last_error}" + (f"; stderr tail:\n{detail}" if detail else "")
            raise DetectorError(request_id, message)

    def shutdown(self) -> None:
        if self._process is not None:
            try:
                self._process.kill()
                self._process.wait(timeout=5)
            except OSError:
                pass
        self._process = None
        self._reader = None

    def describe(self) -> dict:
        return {"command": self.command, "handshake": self.handshake_info}


def _parse_detections(response: dict) -> list[Detection]:
    raw = response.get("detections")
    if not isinstance(raw, list):
        raise ValueError(f"missing detections array in response: {response}")
    detections = []
    for item in raw:
        detections.append(
            Detection(
                class_name=str(item["class"]),
                box=BoundingBox(
                    float(item["x_min"]),
                    float(item["y_min"]),
                    float(item["x_max"]),
                    float(item["y_max"]),
                ),
                confidence=float(item["confidence"]),
            )
        )
    return detections


class ProtocolDetectorClient:
    """Adapt a :class:`DetectorHandle` to the pipeline's detect interface.

    Applies the configured detector-to-dataset class-name mapping (for
    example ``person`` -> ``Pedestrian``) to every detection.
    """

    def __init__(
        self,
        command: Sequence[str],
        *,
        class_map: Mapping[str, str] | None = None,
        timeout: float = 30.0,
        retries: int = 2,
    ):
        self.handle = DetectorHandle(command, timeout=timeout, retries=retries)
        self.class_map = dict(class_map or {})

    def detect(
        self, image_path: Path | str, frame_id: int, request_key: str
    ) -> list[Detection]:
        detections = self.handle.detect(image_path, request_id=request_key)
        if not self.class_map:
            return detections
        return [
            Detection(
                class_name=self.class_map.get(det.class_name, det.class_name),
                box=det.box,
                confidence=det.confidence,
            )
            for det in detections
        ]

    def close(self) -> None:
        self.handle.shutdown()

    def describe(self) -> dict:
        return {"kind": "protocol", **self.handle.describe()}


class MockDetector:
    """In-process detector with deterministic, seedable behaviors.

    Modes: ``echo_gt`` returns the ground-truth box with confidence 1;
    ``offset`` shifts it by a fixed vector; ``noisy`` jitters it with noise
    derived from (seed, request key) so results are independent of execution
    order; ``silent`` returns nothing.
    """

    def __init__(
        self,
        mode: str,
        ground_truth: Mapping[int, BoundingBox],
        *,
        target_class: str = "Pedestrian",
        offset: tuple[float, float] = (0.0, 0.0),
        noise_px: float = 4.0,
        seed: int = 0,
    ):
        if mode not in MOCK_MODES:
            raise ValueError(f"unknown mock mode {mode!r}, expected one of {MOCK_MODES}")
        self.mode = mode
        self.ground_truth = dict(ground_truth)
        self.target_class = target_class
        self.offset = offset
        self.noise_px = noise_px
        self.seed = seed

    def _rng(self, request_key: str) -> np.random.Generator:
        digest = hashlib.sha256(f"{self.seed}:{request_key}".encode()).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "little"))

    def detect(
        self, image_path: Path | str, frame_id: int, request_key: str
    ) -> list[Detection]:
        if self.mode == "silent":
            return []
        gt = self.ground_truth.get(frame_id)
        if gt is None:
            return []
        if self.mode == "echo_gt":
            return [Detection(self.target_class, gt, confidence=1.0)]
        if self.mode == "offset":
            dx, dy = self.offset
            box = BoundingBox(gt.x_min + dx, gt.y_min + dy, gt.x_max + dx, gt.y_max + dy)
            return [Detection(self.target_class, box, confidence=1.0)]
        rng = self._rng(request_key)
        dx, dy = rng.uniform(-self.noise_px, self.noise_px, size=2)
        grow = rng.uniform(0.0, self.noise_px, size=2)
        box = BoundingBox(
            gt.x_min + dx - grow[0],
            gt.y_min + dy - grow[1],
            gt.x_max + dx + grow[0],
            gt.y_max + dy + grow[1],
        )
        confidence = float(rng.uniform(0.5, 1.0))
        return [Detection(self.target_class, box, confidence=confidence)]

    def close(self) -> None:
        pass

    def describe(self) -> dict:
        info = {"kind": "mock", "mode": self.mode, "seed": self.seed}
        if self.mode == "offset":
            info["offset"] = list(self.offset)
        if self.mode == "noisy":
            info["noise_px"] = self.noise_px
        return info
