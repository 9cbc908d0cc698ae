"""Declarative run configuration.

Runs are defined by a TOML file; every dataset/threshold/adapter choice
lives there so an experiment is reviewable and diffable. CLI flags override
individual fields. Relative dataset/output paths resolve against the config
file's directory.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .degradation import CRF_MAX, CRF_MIN, COLORSPACES, KNOWN_CODECS
from .detector import MOCK_MODES

MOCK_CODECS = ("mock_identity", "mock_quantizer")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CodecCommandConfig:
    """Encode/decode command templates for one external codec."""

    encode: str
    decode: str
    extension: str = "bin"
    pixfmt: str = "yuv420p"
    version: str = "unknown"
    timeout_s: float = 120.0


@dataclass(frozen=True)
class DetectorConfig:
    """Either a protocol command or a built-in mock mode."""

    command: str | None = None
    mode: str | None = None
    offset: tuple[float, float] = (0.0, 0.0)
    noise_px: float = 4.0
    timeout_s: float = 30.0
    retries: int = 2
    class_map: Mapping[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if (self.command is None) == (self.mode is None):
            raise ConfigError("detector needs exactly one of 'command' or 'mode'")
        if self.mode is not None and self.mode not in MOCK_MODES:
            raise ConfigError(
                f"unknown detector mode {self.mode!r}, expected one of {MOCK_MODES}"
            )
        if self.retries < 0:
            raise ConfigError("detector retries must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    images_dir: Path
    labels_dir: Path
    output_dir: Path
    codecs: tuple[str, ...] = MOCK_CODECS
    crf_values: tuple[int, ...] = tuple(range(CRF_MIN, CRF_MAX + 1))
    colorspaces: tuple[str, ...] = COLORSPACES
    codec_commands: Mapping[str, CodecCommandConfig] = field(default_factory=dict)
    detector: DetectorConfig = field(default_factory=lambda: DetectorConfig(mode="echo_gt"))
    class_map: Mapping[str, int] = field(default_factory=lambda: {"Pedestrian": 0})
    confidence_threshold: float = 0.5
    iou_threshold: float = 0.5
    workers: int = 1
    seed: int = 0
    failure_cap: float = 0.01

    def validate(self) -> None:
        for name, value in (
            ("confidence_threshold", self.confidence_threshold),
            ("iou_threshold", self.iou_threshold),
        ):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} {value} outside [0, 1]")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.codecs:
            raise ConfigError("no codecs selected")
        for codec in self.codecs:
            if codec not in KNOWN_CODECS:
                raise ConfigError(
                    f"unknown codec {codec!r}, expected one of {sorted(KNOWN_CODECS)}"
                )
            if codec not in MOCK_CODECS and codec not in self.codec_commands:
                raise ConfigError(f"codec {codec!r} has no [codec.{codec}] command config")
        if not self.crf_values:
            raise ConfigError("empty CRF range")
        for crf in self.crf_values:
            if not CRF_MIN <= crf <= CRF_MAX:
                raise ConfigError(f"CRF {crf} outside [{CRF_MIN}, {CRF_MAX}]")
        for mode in self.colorspaces:
            if mode not in COLORSPACES:
                raise ConfigError(f"unknown colorspace {mode!r}")
        if not 0.0 <= self.failure_cap <= 1.0:
            raise ConfigError(f"failure_cap {self.failure_cap} outside [0, 1]")
        if "Pedestrian" not in self.class_map:
            raise ConfigError("class map must cover 'Pedestrian'")
        self.detector.validate()

    def to_json_obj(self) -> dict:
        return {
            "images_dir": str(self.images_dir),
            "labels_dir": str(self.labels_dir),
            "output_dir": str(self.output_dir),
            "codecs": list(self.codecs),
            "crf_values": list(self.crf_values),
            "colorspaces": list(self.colorspaces),
            "codec_commands": {
                name: vars(cfg).copy() for name, cfg in sorted(self.codec_commands.items())
            },
            "detector": {
                "command": self.detector.command,
                "mode": self.detector.mode,
                "offset": list(self.detector.offset),
                "noise_px": self.detector.noise_px,
                "timeout_s": self.detector.timeout_s,
                "retries": self.detector.retries,
                "class_map": dict(self.detector.class_map),
            },
            "class_map": dict(self.class_map),
            "confidence_threshold": self.confidence_threshold,
            "iou_threshold": self.iou_threshold,
            "workers": self.workers,
            "seed": self.seed,
            "failure_cap": self.failure_cap,
        }

    def config_hash(self) -> str:
        """Hash of the experiment definition.

        Sweep-dimension filters (codecs, CRFs, colorspaces), worker count,
        failure cap, and the output directory are excluded: partial sweeps
        into the same store are a supported resume pattern and runtime knobs
        do not change what the records mean.
        """
        obj = self.to_json_obj()
        for runtime_key in (
            "output_dir",
            "codecs",
            "crf_values",
            "colorspaces",
            "workers",
            "failure_cap",
        ):
            obj.pop(runtime_key)
        canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def parse_crf_spec(spec) -> tuple[int, ...]:
    """Accept an int, a list of ints, or an 'a..b' inclusive range string."""
    if isinstance(spec, int):
        return (spec,)
    if isinstance(spec, str):
        if ".." in spec:
            lo_text, hi_text = spec.split("..", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ConfigError(f"empty CRF range {spec!r}")
            return tuple(range(lo, hi + 1))
        return (int(spec),)
    return tuple(int(v) for v in spec)


def normalize_colorspace(name: str) -> str:
    aliases = {"gray": "grayscale", "grey": "grayscale"}
    return aliases.get(name, name)


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path: Path | str, overrides: Mapping | None = None) -> RunConfig:
    """Load a TOML run configuration, applying CLI overrides on top."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    base = path.resolve().parent
    overrides = dict(overrides or {})

    dataset = data.get("dataset", {})
    output = data.get("output", {})
    sweep = data.get("sweep", {})
    thresholds = data.get("thresholds", {})
    run = data.get("run", {})
    detector_data = dict(data.get("detector", {}))

    def pick(override_key, value):
        return overrides[override_key] if overrides.get(override_key) is not None else value

    images = pick("images", dataset.get("images"))
    labels = pick("labels", dataset.get("labels"))
    out_dir = pick("output", output.get("dir"))
    for name, value in (("images", images), ("labels", labels), ("output", out_dir)):
        if value is None:
            raise ConfigError(f"missing required config value: {name}")

    codec_commands = {}
    for name, cfg in data.get("codec", {}).items():
        try:
            codec_commands[name] = CodecCommandConfig(
                encode=cfg["encode"],
                decode=cfg["decode"],
                extension=cfg.get("extension", "bin"),
                pixfmt=cfg.get("pixfmt", "yuv420p"),
                version=cfg.get("version", "unknown"),
                timeout_s=float(cfg.get("timeout_s", 120.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"[codec.{name}] missing required key {exc}") from None

    offset = detector_data.get("offset", (0.0, 0.0))
    detector = DetectorConfig(
        command=detector_data.get("command"),
        mode=detector_data.get("mode"),
        offset=(float(offset[0]), float(offset[1])),
        noise_px=float(detector_data.get("noise_px", 4.0)),
        timeout_s=float(detector_data.get("timeout_s", 30.0)),
        retries=int(detector_data.get("retries", 2)),
        class_map=dict(detector_data.get("class_map", {})),
    )

    crf_spec = pick("crf", sweep.get("crf", f"{CRF_MIN}..{CRF_MAX}"))
    colorspaces = pick("colorspaces", sweep.get("colorspaces", list(COLORSPACES)))
    codecs = pick("codecs", sweep.get("codecs", list(MOCK_CODECS)))

    config = RunConfig(
        images_dir=_resolve(base, str(images)),
        labels_dir=_resolve(base, str(labels)),
        output_dir=_resolve(base, str(out_dir)),
        codecs=tuple(codecs),
        crf_values=parse_crf_spec(crf_spec),
        colorspaces=tuple(normalize_colorspace(c) for c in colorspaces),
        codec_commands=codec_commands,
        detector=detector,
        class_map=dict(data.get("classes", {"Pedestrian": 0})),
        confidence_threshold=float(
            pick("confidence_threshold", thresholds.get("confidence", 0.5))
        ),
        iou_threshold=float(pick("iou_threshold", thresholds.get("iou", 0.5))),
        workers=int(pick("workers", run.get("workers", 1))),
        seed=int(pick("seed", run.get("seed", 0))),
        failure_cap=float(pick("failure_cap", run.get("failure_cap", 0.01))),
    )
    config.validate()
    return config
