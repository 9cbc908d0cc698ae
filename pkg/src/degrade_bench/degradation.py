"""Codec x CRF x colorspace sweeps over dataset frames.

Each frame is encoded as an independent single-frame video (intra coding
only), decoded back, and stored as lossless PNG. Real codecs run as external
command pairs declared in configuration; two deterministic in-process mocks
(`mock_identity`, `mock_quantizer`) keep the pipeline testable without any
codec installed.
"""

from __future__ import annotations

import itertools
import os
import shlex
import subprocess
import tempfile
import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import imgio
from .dataset import ImageFrame
from .metrics import QualityMeasurement, psnr

CRF_MIN = 0
CRF_MAX = 51

COLORSPACES = ("rgb", "grayscale")

# The registered adapter set: four real codecs plus the two built-in mocks.
KNOWN_CODECS = frozenset(
    {"h264", "h265", "hevc_nvenc", "av1", "mock_identity", "mock_quantizer"}
)


def validate_crf(value: int) -> int:
    if not CRF_MIN <= value <= CRF_MAX:
        raise ValueError(f"CRF {value} outside [{CRF_MIN}, {CRF_MAX}]")
    return value


def validate_colorspace(mode: str) -> str:
    if mode not in COLORSPACES:
        raise ValueError(f"unknown colorspace {mode!r}, expected one of {COLORSPACES}")
    return mode


@dataclass(frozen=True, order=True)
class SweepKey:
    """One (frame, codec, crf, colorspace) cell of the sweep grid."""

    frame_id: int
    codec: str
    crf: int
    colorspace: str

    def candidate_relpath(self, stem: str) -> Path:
        return (
            Path("candidates")
            / self.codec
            / self.colorspace
            / f"crf{self.crf:02d}"
            / f"{stem}.png"
        )


@dataclass(frozen=True)
class SweepPlan:
    """The full Cartesian grid, dimensions sorted for deterministic order."""

    frames: tuple[int, ...]
    codecs: tuple[str, ...]
    crf_values: tuple[int, ...]
    colorspaces: tuple[str, ...]
    expected_candidates: int

    def keys(self) -> Iterator[SweepKey]:
        """Yield cells in lexicographic (frame, codec, crf, colorspace) order."""
        for frame_id, codec, crf, colorspace in itertools.product(
            self.frames, self.codecs, self.crf_values, self.colorspaces
        ):
            yield SweepKey(frame_id, codec, crf, colorspace)


def plan_sweep(
    frames: Sequence[int],
    codecs: Sequence[str],
    crf_values: Sequence[int],
    colorspaces: Sequence[str],
) -> SweepPlan:
    """Build the sweep grid; every dimension must be non-empty and valid."""
    if not frames or not codecs or not crf_values or not colorspaces:
        raise ValueError("every sweep dimension must be non-empty")
    for name, values in (
        ("frames", frames),
        ("codecs", codecs),
        ("crf_values", crf_values),
        ("colorspaces", colorspaces),
    ):
        if len(set(values)) != len(values):
            raise ValueError(f"duplicate entries in {name}: {list(values)}")
    for codec in codecs:
        if codec not in KNOWN_CODECS:
            raise ValueError(f"unknown codec {codec!r}, expected one of {sorted(KNOWN_CODECS)}")
    crfs = tuple(sorted(validate_crf(v) for v in crf_values))
    modes = tuple(sorted(validate_colorspace(m) for m in colorspaces))
    plan = SweepPlan(
        frames=tuple(sorted(frames)),
        codecs=tuple(sorted(codecs)),
        crf_values=crfs,
        colorspaces=modes,
        expected_candidates=len(frames) * len(codecs) * len(crfs) * len(modes),
    )
    return plan


def grayscale_roundtrip(image: np.ndarray) -> np.ndarray:
    """Collapse RGB to BT.601 luma and replicate it back to three channels.

    Uses integer arithmetic for exact round-half-up of
    0.299*R + 0.587*G + 0.114*B, which makes the operation idempotent
    byte-for-byte: already-gray pixels map to themselves.
    """
    arr = np.asarray(image)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected uint8 HxWx3 image, got {arr.dtype} {arr.shape}")
    channels = arr.astype(np.uint32)
    luma = (
        299 * channels[..., 0] + 587 * channels[..., 1] + 114 * channels[..., 2] + 500
    ) // 1000
    return np.repeat(luma[..., None], 3, axis=2).astype(np.uint8)


@dataclass
class DegradationCandidate:
    """One degraded image plus its quality measurement.

    Failed cells stay in the result list with ``failed=True`` and the
    captured diagnostics; a long sweep must survive sporadic encoder faults.
    """

    frame_id: int
    codec: str
    crf: int
    colorspace: str
    decoded_image_path: Path | None
    encoded_bytes: int
    quality: QualityMeasurement | None
    failed: bool = False
    error: str | None = None

    @property
    def key(self) -> SweepKey:
        return SweepKey(self.frame_id, self.codec, self.crf, self.colorspace)


class CodecAdapterError(RuntimeError):
    """Encode/decode failure for a single candidate; carries diagnostics."""


class IdentityCodec:
    """Lossless mock: decoded image is byte-identical to the input.

    ``encoded_bytes`` reports the raw sample count, the size of an
    uncompressed intermediate.
    """

    identifier = "mock_identity"
    version = "builtin"

    def encode_decode(
        self, image: np.ndarray, crf: int, workdir: Path | None = None
    ) -> tuple[np.ndarray, int]:
        validate_crf(crf)
        return image.copy(), int(image.nbytes)


def _run_length_encoded_size(samples: np.ndarray) -> int:
    """Byte size of a (value, run-length) coding of the flattened samples.

    Runs longer than 255 split into chunks; each chunk costs two bytes.
    """
    flat = samples.reshape(-1)
    if flat.size == 0:
        return 0
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [flat.size]))
    lengths = ends - starts
    chunks = np.sum((lengths + 254) // 255)
    return int(2 * chunks)


class QuantizerCodec:
    """Deterministic lossy mock: uniform quantization with step 1 + CRF.

    Each sample v maps to floor(v / s) * s + floor(s / 2), clamped to
    [0, 255]; CRF 0 (step 1) leaves the image unchanged. The compressed
    intermediate is a run-length coding of the quantized samples.
    """

    identifier = "mock_quantizer"
    version = "builtin"

    @staticmethod
    def step(crf: int) -> int:
        return 1 + validate_crf(crf)

    def encode_decode(
        self, image: np.ndarray, crf: int, workdir: Path | None = None
    ) -> tuple[np.ndarray, int]:
        step = self.step(crf)
        values = image.astype(np.int32)
        quantized = (values // step) * step + step // 2
        decoded = np.clip(quantized, 0, 255).astype(np.uint8)
        return decoded, _run_length_encoded_size(decoded)


class CommandCodec:
    """External codec driven by encode/decode command templates.

    Templates receive ``{input}``, ``{output}``, ``{crf}``, and ``{pixfmt}``
    placeholders. The encode command must read one image file and write one
    compressed file; the decode command reconstructs a PNG from it. The
    harness never links codec libraries directly, so the recorded command
    lines fully describe a run.
    """

    def __init__(
        self,
        identifier: str,
        encode_template: str,
        decode_template: str,
        *,
        extension: str = "bin",
        pixfmt: str = "yuv420p",
        version: str = "unknown",
        timeout: float = 120.0,
    ):
        if identifier not in KNOWN_CODECS:
            raise ValueError(f"unknown codec identifier {identifier!r}")
        self.identifier = identifier
        self.encode_template = encode_template
        self.decode_template = decode_template
        self.extension = extension.lstrip(".")
        self.pixfmt = pixfmt
        self.version = version
        self.timeout = timeout

    def _run(self, template: str, mapping: Mapping[str, str]) -> None:
        argv = [part.format_map(mapping) for part in shlex.split(template)]
        try:
            result = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise CodecAdapterError(f"timeout after {self.timeout}s: {argv}") from exc
        except OSError as exc:
            raise CodecAdapterError(f"failed to launch {argv}: {exc}") from exc
        if result.returncode != 0:
            raise CodecAdapterError(
                f"exit {result.returncode} from {argv}: {result.stderr.strip()[-500:]}"
            )

    def encode_decode(
        self, image: np.ndarray, crf: int, workdir: Path | None = None
    ) -> tuple[np.ndarray, int]:
        validate_crf(crf)
        with tempfile.TemporaryDirectory(dir=workdir, prefix="codec-") as tmp:
            tmp_path = Path(tmp)
            source = tmp_path / "source.png"
            encoded = tmp_path / f"encoded.{self.extension}"
            decoded = tmp_path / "decoded.png"
            imgio.save_image(source, image)
            mapping = {"crf": str(crf), "pixfmt": self.pixfmt}
            self._run(
                self.encode_template,
                {**mapping, "input": str(source), "output": str(encoded)},
            )
            if not encoded.exists():
                raise CodecAdapterError(f"encode produced no output: {encoded}")
            encoded_bytes = encoded.stat().st_size
            self._run(
                self.decode_template,
                {**mapping, "input": str(encoded), "output": str(decoded)},
            )
            if not decoded.exists():
                raise CodecAdapterError(f"decode produced no output: {decoded}")
            result = imgio.load_image(decoded)
        if result.shape != image.shape:
            raise CodecAdapterError(
                f"decoded shape {result.shape} differs from input {image.shape}"
            )
        return result, encoded_bytes


class _ReferenceCache:
    """Per-frame reference images, bounded so huge sweeps stay in memory.

    Plan order is frame-major, so a small cache serves all workers touching
    the same frame at once.
    """

    def __init__(self, loader: Callable[[int], np.ndarray], max_entries: int = 32):
        self._loader = loader
        self._max_entries = max_entries
        self._lock = threading.Lock()
        self._entries: dict[tuple[int, str], np.ndarray] = {}

    def get(self, frame_id: int, colorspace: str) -> np.ndarray:
        key = (frame_id, colorspace)
        with self._lock:
            cached = self._entries.get(key)
        if cached is not None:
            return cached
        original = self._loader(frame_id)
        image = original if colorspace == "rgb" else grayscale_roundtrip(original)
        with self._lock:
            if len(self._entries) >= self._max_entries:
                self._entries.pop(next(iter(self._entries)))
            self._entries[key] = image
        return image


@dataclass
class SweepRuntime:
    """Execution-side inputs for a sweep: adapters, frames, output layout."""

    adapters: Mapping[str, object]
    originals: Mapping[int, ImageFrame]
    output_dir: Path
    workers: int = 1
    workdir: Path | None = None


def encode_decode(adapter, image: np.ndarray, crf: int, workdir: Path | None = None):
    """Run one encode/decode pass through an adapter.

    Thin dispatch kept as a named operation so callers do not depend on the
    adapter class surface.
    """
    return adapter.encode_decode(image, crf, workdir)


def execute_candidate(
    key: SweepKey,
    adapter,
    reference: np.ndarray,
    frame_stem: str,
    output_dir: Path,
    workdir: Path | None = None,
) -> DegradationCandidate:
    """Degrade one frame under one condition and measure its quality.

    The reference passed in must already match the cell's colorspace; PSNR
    then isolates codec loss from color removal.
    """
    decoded, encoded_bytes = encode_decode(adapter, reference, key.crf, workdir)
    if decoded.shape != reference.shape:
        raise CodecAdapterError(
            f"decoded shape {decoded.shape} differs from reference {reference.shape}"
        )
    quality = psnr(reference, decoded)
    quality = QualityMeasurement(
        mse=quality.mse, psnr_db=quality.psnr_db, encoded_bytes=encoded_bytes
    )
    out_path = output_dir / key.candidate_relpath(frame_stem)
    imgio.save_image(out_path, decoded)
    return DegradationCandidate(
        frame_id=key.frame_id,
        codec=key.codec,
        crf=key.crf,
        colorspace=key.colorspace,
        decoded_image_path=out_path,
        encoded_bytes=encoded_bytes,
        quality=quality,
    )


def run_sweep(
    plan: SweepPlan,
    adapters: Mapping[str, object],
    originals: Mapping[int, ImageFrame],
    output_dir: Path,
    *,
    workers: int = 1,
    skip: frozenset[SweepKey] | set[SweepKey] = frozenset(),
    candidate_hook: Callable[[DegradationCandidate], None] | None = None,
    workdir: Path | None = None,
) -> list[DegradationCandidate]:
    """Execute the sweep plan and return one candidate per grid cell.

    Adapter failures never abort the run; they yield flagged candidates.
    ``skip`` removes already-completed cells (resume support). The hook, when
    given, runs inside worker threads as each candidate completes; results
    are returned sorted on the cell key, independent of scheduling.

    Codec intermediates land under ``workdir`` (or ``DEGRADE_BENCH_TMPDIR``
    when set, else the system temp directory).
    """
    if workdir is None:
        env_tmp = os.environ.get("DEGRADE_BENCH_TMPDIR")
        if env_tmp:
            workdir = Path(env_tmp)
            workdir.mkdir(parents=True, exist_ok=True)
    for codec in plan.codecs:
        if codec not in adapters:
            raise KeyError(f"no adapter registered for codec {codec!r}")
    missing = [f for f in plan.frames if f not in originals]
    if missing:
        raise FileNotFoundError(f"plan references unknown frames: {missing}")
    for frame_id in plan.frames:
        source = Path(originals[frame_id].source_path)
        if not source.exists():
            raise FileNotFoundError(f"missing original image: {source}")

    cache = _ReferenceCache(
        lambda frame_id: imgio.load_image(originals[frame_id].source_path)
    )
    pending = [key for key in plan.keys() if key not in skip]

    def process(key: SweepKey) -> DegradationCandidate:
        try:
            reference = cache.get(key.frame_id, key.colorspace)
            candidate = execute_candidate(
                key,
                adapters[key.codec],
                reference,
                originals[key.frame_id].stem,
                output_dir,
                workdir,
            )
        except Exception:
            candidate = DegradationCandidate(
                frame_id=key.frame_id,
                codec=key.codec,
                crf=key.crf,
                colorspace=key.colorspace,
                decoded_image_path=None,
                encoded_bytes=0,
                quality=None,
                failed=True,
                error=traceback.format_exc(limit=5),
            )
        if candidate_hook is not None:
            candidate_hook(candidate)
        return candidate

    if workers <= 1:
        results = [process(key) for key in pending]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, pending))
    results.sort(key=lambda c: c.key)
    return results
