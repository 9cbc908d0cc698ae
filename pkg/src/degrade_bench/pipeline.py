"""Drivers behind the CLI subcommands.

Each driver takes a validated RunConfig, works out of the configured output
directory, and is safe to re-run: completed (frame, condition) pairs are
skipped, so an interrupted run resumes where it stopped and converges to the
same record set as an uninterrupted one.
"""

from __future__ import annotations

import datetime as _dt
import shlex
import sys
import threading
from dataclasses import dataclass
from pathlib import Path

from . import imgio
from .config import RunConfig
from .dataset import (
    ImageFrame,
    convert_to_yolo,
    format_yolo_annotation_file,
    invert_yolo,
    parse_kitti_label_file,
    parse_yolo_annotation_file,
    select_single_pedestrian_frames,
)
from .degradation import (
    CommandCodec,
    DegradationCandidate,
    IdentityCodec,
    QuantizerCodec,
    SweepKey,
    plan_sweep,
    run_sweep,
)
from .detector import (
    DetectorError,
    MatchResult,
    MockDetector,
    ProtocolDetectorClient,
    match_single_ground_truth,
)
from .metrics import BoundingBox
from .results import (
    Condition,
    EvaluationRecord,
    RecordStore,
    RunManifest,
    render_report,
    summarize,
)

SELECTION_FILENAME = "selection.txt"
ANNOTATIONS_DIRNAME = "annotations"
REPORT_DIRNAME = "report"


class PipelineError(RuntimeError):
    pass


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def frame_id_from_stem(stem: str) -> int:
    try:
        return int(stem)
    except ValueError:
        raise PipelineError(
            f"frame stem {stem!r} is not a numeric id; expected KITTI-style names"
        ) from None


def _load_frame(images_dir: Path, stem: str) -> ImageFrame:
    image_path = images_dir / f"{stem}.png"
    if not image_path.exists():
        raise PipelineError(f"missing image for frame {stem!r}: {image_path}")
    width, height = imgio.image_size(image_path)
    return ImageFrame(
        frame_id=frame_id_from_stem(stem),
        width=width,
        height=height,
        source_path=image_path,
    )


def convert_labels(config: RunConfig) -> list[ImageFrame]:
    """Convert KITTI labels to YOLO files and write the evaluation subset."""
    label_files = sorted(config.labels_dir.glob("*.txt"))
    if not label_files:
        raise PipelineError(f"no label files under {config.labels_dir}")
    annotations_dir = config.output_dir / ANNOTATIONS_DIRNAME
    annotations_dir.mkdir(parents=True, exist_ok=True)

    frames_with_labels = []
    for label_path in label_files:
        stem = label_path.stem
        frame = _load_frame(config.images_dir, stem)
        labels = parse_kitti_label_file(label_path.read_text())
        annotations = [
            convert_to_yolo(lb, frame, config.class_map)
            for lb in labels
            if lb.object_class in config.class_map
        ]
        (annotations_dir / f"{stem}.txt").write_text(
            format_yolo_annotation_file(annotations)
        )
        frames_with_labels.append((frame, labels))

    subset = select_single_pedestrian_frames(frames_with_labels)
    selection_path = config.output_dir / SELECTION_FILENAME
    selection_path.write_text("".join(f"{f.stem}\n" for f in subset))
    _log(f"converted {len(label_files)} label files; selected {len(subset)} frames")
    if not subset:
        _log("warning: no single-pedestrian frames in this dataset")
    return subset


def load_selection(config: RunConfig) -> list[ImageFrame]:
    selection_path = config.output_dir / SELECTION_FILENAME
    if not selection_path.exists():
        raise PipelineError(
            f"no selection list at {selection_path}; run convert-labels first"
        )
    stems = [line.strip() for line in selection_path.read_text().splitlines() if line.strip()]
    return [_load_frame(config.images_dir, stem) for stem in stems]


def load_ground_truth(
    config: RunConfig, frames: list[ImageFrame]
) -> dict[int, BoundingBox]:
    """Ground-truth pixel boxes, denormalized from the converted annotations."""
    annotations_dir = config.output_dir / ANNOTATIONS_DIRNAME
    pedestrian_id = config.class_map["Pedestrian"]
    ground_truth = {}
    for frame in frames:
        ann_path = annotations_dir / f"{frame.stem}.txt"
        if not ann_path.exists():
            raise PipelineError(f"missing annotation file {ann_path}")
        annotations = [
            a
            for a in parse_yolo_annotation_file(ann_path.read_text())
            if a.class_id == pedestrian_id
        ]
        if len(annotations) != 1:
            raise PipelineError(
                f"frame {frame.stem} has {len(annotations)} pedestrian annotations, "
                "expected exactly 1 in the evaluation subset"
            )
        ground_truth[frame.frame_id] = invert_yolo(annotations[0], frame)
    return ground_truth


def build_adapters(config: RunConfig) -> dict[str, object]:
    adapters: dict[str, object] = {}
    for codec in config.codecs:
        if codec == "mock_identity":
            adapters[codec] = IdentityCodec()
        elif codec == "mock_quantizer":
            adapters[codec] = QuantizerCodec()
        else:
            cmd = config.codec_commands[codec]
            adapters[codec] = CommandCodec(
                codec,
                cmd.encode,
                cmd.decode,
                extension=cmd.extension,
                pixfmt=cmd.pixfmt,
                version=cmd.version,
                timeout=cmd.timeout_s,
            )
    return adapters


class DetectorPool:
    """One detector client per worker thread.

    The in-process mocks are pure, so a single instance is shared; protocol
    detectors get one subprocess per thread (one in-flight request each).
    """

    def __init__(self, config: RunConfig, ground_truth: dict[int, BoundingBox]):
        self._config = config
        self._ground_truth = ground_truth
        self._local = threading.local()
        self._clients: list = []
        self._lock = threading.Lock()
        self._shared_mock = None
        if config.detector.mode is not None:
            self._shared_mock = MockDetector(
                config.detector.mode,
                ground_truth,
                offset=config.detector.offset,
                noise_px=config.detector.noise_px,
                seed=config.seed,
            )

    def get(self):
        if self._shared_mock is not None:
            return self._shared_mock
        client = getattr(self._local, "client", None)
        if client is None:
            client = ProtocolDetectorClient(
                shlex.split(self._config.detector.command),
                class_map=self._config.detector.class_map,
                timeout=self._config.detector.timeout_s,
                retries=self._config.detector.retries,
            )
            self._local.client = client
            with self._lock:
                self._clients.append(client)
        return client

    def describe(self) -> dict:
        if self._shared_mock is not None:
            return self._shared_mock.describe()
        return {"kind": "protocol", "command": self._config.detector.command}

    def close(self) -> None:
        with self._lock:
            for client in self._clients:
                client.close()
            self._clients.clear()


def build_manifest(config: RunConfig, adapters: dict[str, object]) -> RunManifest:
    codec_versions = {name: getattr(a, "version", "unknown") for name, a in adapters.items()}
    adapter_commands = {}
    for name in config.codecs:
        cmd = config.codec_commands.get(name)
        if cmd is not None:
            adapter_commands[name] = {"encode": cmd.encode, "decode": cmd.decode}
        else:
            adapter_commands[name] = {"builtin": name}
    detector_cfg = config.detector
    return RunManifest(
        config_hash=config.config_hash(),
        codec_versions=codec_versions,
        adapter_commands=adapter_commands,
        detector={
            "command": detector_cfg.command,
            "mode": detector_cfg.mode,
            "class_map": dict(detector_cfg.class_map),
        },
        thresholds={
            "confidence": config.confidence_threshold,
            "iou": config.iou_threshold,
        },
        started_at=_utcnow(),
        config=config.to_json_obj(),
    )


def _open_store(config: RunConfig, adapters: dict[str, object]) -> RecordStore:
    return RecordStore.open_or_create(
        config.output_dir, build_manifest(config, adapters)
    )


def _match_to_record(
    frame_id: int,
    condition: Condition,
    match: MatchResult,
    *,
    psnr_db: float | None = None,
    encoded_bytes: int | None = None,
    failed: bool = False,
) -> EvaluationRecord:
    return EvaluationRecord(
        frame_id=frame_id,
        condition=condition,
        iou=match.iou,
        confidence=match.confidence,
        psnr_db=psnr_db,
        encoded_bytes=encoded_bytes,
        failed=failed,
    )


@dataclass
class RunStats:
    total: int = 0
    completed: int = 0
    skipped: int = 0
    failed: int = 0

    @property
    def failure_fraction(self) -> float:
        return self.failed / self.total if self.total else 0.0


def run_baseline(config: RunConfig) -> RunStats:
    """Evaluate the detector on the unmodified subset frames."""
    frames = load_selection(config)
    if not frames:
        raise PipelineError("selection list is empty; nothing to evaluate")
    ground_truth = load_ground_truth(config, frames)
    adapters = build_adapters(config)
    store = _open_store(config, adapters)
    pool = DetectorPool(config, ground_truth)
    stats = RunStats(total=len(frames))
    existing = store.keys()
    try:
        for frame in frames:
            condition = Condition.baseline()
            if (frame.frame_id, condition.key()) in existing:
                stats.skipped += 1
                continue
            detector = pool.get()
            detections = detector.detect(
                frame.source_path, frame.frame_id, f"baseline/{frame.stem}"
            )
            match = match_single_ground_truth(
                detections,
                ground_truth[frame.frame_id],
                conf_threshold=config.confidence_threshold,
                iou_threshold=config.iou_threshold,
            )
            store.append(_match_to_record(frame.frame_id, condition, match))
            stats.completed += 1
    finally:
        pool.close()
    _log(
        f"baseline: {stats.completed} evaluated, {stats.skipped} already present, "
        f"{len(frames)} frames total"
    )
    return stats


def run_sweep_command(config: RunConfig) -> RunStats:
    """Degrade every subset frame under the full plan and evaluate each."""
    frames = load_selection(config)
    if not frames:
        raise PipelineError("selection list is empty; nothing to evaluate")
    ground_truth = load_ground_truth(config, frames)
    adapters = build_adapters(config)
    store = _open_store(config, adapters)
    if not any(r.condition.is_baseline for r in store.records()):
        raise PipelineError("no baseline records; run baseline before sweep")

    plan = plan_sweep(
        [f.frame_id for f in frames],
        config.codecs,
        config.crf_values,
        config.colorspaces,
    )
    originals = {f.frame_id: f for f in frames}
    stems = {f.frame_id: f.stem for f in frames}
    skip = {
        SweepKey(r.frame_id, r.condition.codec, r.condition.crf, r.condition.colorspace)
        for r in store.records()
        if not r.condition.is_baseline
    }
    pool = DetectorPool(config, ground_truth)
    stats = RunStats(total=plan.expected_candidates, skipped=len(skip))
    pending_count = plan.expected_candidates - len(skip)
    progress_lock = threading.Lock()

    def handle_candidate(candidate: DegradationCandidate) -> None:
        condition = Condition.degraded(
            candidate.codec, candidate.crf, candidate.colorspace
        )
        quality = candidate.quality
        psnr_db = quality.psnr_db if quality is not None else None
        encoded_bytes = candidate.encoded_bytes if not candidate.failed else None
        failed = candidate.failed
        if failed:
            match = MatchResult(matched=False, iou=0.0)
            if candidate.error:
                _log(f"candidate {condition.key()}/{candidate.frame_id} failed:")
                _log(candidate.error.rstrip())
        else:
            request_key = f"{condition.key()}/{stems[candidate.frame_id]}"
            try:
                detections = pool.get().detect(
                    candidate.decoded_image_path, candidate.frame_id, request_key
                )
                match = match_single_ground_truth(
                    detections,
                    ground_truth[candidate.frame_id],
                    conf_threshold=config.confidence_threshold,
                    iou_threshold=config.iou_threshold,
                )
            except DetectorError as exc:
                _log(f"detector failed for {request_key}: {exc}")
                match = MatchResult(matched=False, iou=0.0)
                failed = True
        store.append(
            _match_to_record(
                candidate.frame_id,
                condition,
                match,
                psnr_db=psnr_db,
                encoded_bytes=encoded_bytes,
                failed=failed,
            )
        )
        with progress_lock:
            stats.completed += 1
            if failed:
                stats.failed += 1
            if stats.completed % 500 == 0:
                _log(f"sweep: {stats.completed}/{pending_count} candidates done")

    run_sweep(
        plan,
        adapters,
        originals,
        config.output_dir,
        workers=config.workers,
        skip=skip,
        candidate_hook=handle_candidate,
    )
    pool.close()
    store.finalize(_utcnow())
    _log(
        f"sweep: {stats.completed} evaluated, {stats.skipped} already present, "
        f"{stats.failed} failed, plan size {plan.expected_candidates}"
    )
    if stats.failure_fraction > config.failure_cap:
        raise PipelineError(
            f"failure fraction {stats.failure_fraction:.3f} exceeds cap "
            f"{config.failure_cap:.3f}"
        )
    return stats


def run_report(config: RunConfig) -> list[Path]:
    """Summarize records and emit CSV/SVG report files."""
    store = RecordStore.open(config.output_dir)
    records = store.records()
    if not any(r.condition.is_baseline for r in records):
        raise PipelineError("no baseline records; run baseline before report")
    summary = summarize(records, iou_threshold=config.iou_threshold)
    outputs = render_report(records, summary, config.output_dir / REPORT_DIRNAME)
    _log(f"report: wrote {len(outputs)} files under {config.output_dir / REPORT_DIRNAME}")
    return outputs
