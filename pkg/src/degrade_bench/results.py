"""Persistence and reporting of evaluation records.

The record store is an append-only JSON Lines file (`records.jsonl`) next to
an immutable `manifest.json`; reports are CSV exports plus one SVG line
chart per colorspace. 426k rows are comfortably file-scale and the exports
stay diffable.

Serialized field names match the in-memory types exactly. The one JSON
wrinkle: an infinite PSNR is stored as the string ``"inf"`` because JSON has
no literal for it.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .metrics import match_rate

RECORDS_FILENAME = "records.jsonl"
MANIFEST_FILENAME = "manifest.json"

# Chart color coding per codec; mocks get fixed fallback colors.
SERIES_COLORS = {
    "baseline": "blue",
    "h264": "magenta",
    "h265": "yellow",
    "hevc_nvenc": "cyan",
    "av1": "black",
    "mock_identity": "green",
    "mock_quantizer": "darkorange",
}


@dataclass(frozen=True, order=True)
class Condition:
    """Either the baseline or one (codec, crf, colorspace) cell."""

    codec: str | None = None
    crf: int | None = None
    colorspace: str | None = None

    @classmethod
    def baseline(cls) -> "Condition":
        return cls()

    @classmethod
    def degraded(cls, codec: str, crf: int, colorspace: str) -> "Condition":
        return cls(codec=codec, crf=crf, colorspace=colorspace)

    @property
    def is_baseline(self) -> bool:
        return self.codec is None

    def key(self) -> str:
        if self.is_baseline:
            return "baseline"
        return f"{self.codec}/{self.colorspace}/crf{self.crf:02d}"

    def to_json_obj(self):
        if self.is_baseline:
            return "baseline"
        return {"codec": self.codec, "crf": self.crf, "colorspace": self.colorspace}

    @classmethod
    def from_json_obj(cls, obj) -> "Condition":
        if obj == "baseline":
            return cls.baseline()
        return cls.degraded(obj["codec"], int(obj["crf"]), obj["colorspace"])


BASELINE = Condition.baseline()


class RecordValidationError(ValueError):
    pass


class DuplicateRecordError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationRecord:
    """One (frame, condition) measurement."""

    frame_id: int
    condition: Condition
    iou: float
    confidence: float | None = None
    psnr_db: float | None = None
    encoded_bytes: int | None = None
    failed: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.iou <= 1.0:
            raise RecordValidationError(f"iou {self.iou} outside [0, 1]")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise RecordValidationError(f"confidence {self.confidence} outside [0, 1]")
        if self.condition.is_baseline:
            if self.psnr_db is not None or self.encoded_bytes is not None:
                raise RecordValidationError("baseline records carry no psnr/bytes")
        elif not self.failed:
            if self.psnr_db is None or self.encoded_bytes is None:
                raise RecordValidationError(
                    "degraded records need psnr_db and encoded_bytes unless failed"
                )

    @property
    def key(self) -> tuple[int, str]:
        return (self.frame_id, self.condition.key())

    def to_json_obj(self) -> dict:
        obj: dict = {
            "frame_id": self.frame_id,
            "condition": self.condition.to_json_obj(),
            "iou": self.iou,
            "failed": self.failed,
        }
        if self.confidence is not None:
            obj["confidence"] = self.confidence
        if self.psnr_db is not None:
            obj["psnr_db"] = "inf" if math.isinf(self.psnr_db) else self.psnr_db
        if self.encoded_bytes is not None:
            obj["encoded_bytes"] = self.encoded_bytes
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EvaluationRecord":
        psnr_db = obj.get("psnr_db")
        if psnr_db == "inf":
            psnr_db = math.inf
        return cls(
            frame_id=int(obj["frame_id"]),
            condition=Condition.from_json_obj(obj["condition"]),
            iou=float(obj["iou"]),
            confidence=obj.get("confidence"),
            psnr_db=psnr_db,
            encoded_bytes=obj.get("encoded_bytes"),
            failed=bool(obj.get("failed", False)),
        )


@dataclass
class RunManifest:
    """Immutable provenance for a run; written before any record.

    Only the end timestamp may be filled in later, when a sweep completes.
    """

    config_hash: str
    codec_versions: dict = field(default_factory=dict)
    adapter_commands: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    started_at: str = ""
    finished_at: str | None = None
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


class RecordStore:
    """Append-only store with duplicate rejection and crash-safe resume.

    Appends funnel through a single lock; loading tolerates (and trims) a
    torn trailing line left by a killed process.
    """

    def __init__(self, directory: Path, manifest: RunManifest):
        self.directory = Path(directory)
        self.records_path = self.directory / RECORDS_FILENAME
        self.manifest_path = self.directory / MANIFEST_FILENAME
        self.manifest = manifest
        self._lock = threading.Lock()
        self._keys: set[tuple[int, str]] = set()
        self._records: list[EvaluationRecord] = []

    @classmethod
    def create(cls, directory: Path, manifest: RunManifest) -> "RecordStore":
        """Create a fresh store; the manifest lands before any record."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest_path = directory / MANIFEST_FILENAME
        if manifest_path.exists():
            raise FileExistsError(f"store already exists: {manifest_path}")
        manifest_path.write_text(manifest.to_json())
        store = cls(directory, manifest)
        store.records_path.touch()
        return store

    @classmethod
    def open(cls, directory: Path) -> "RecordStore":
        """Open an existing store, repairing any torn trailing line."""
        directory = Path(directory)
        manifest_path = directory / MANIFEST_FILENAME
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest at {manifest_path}")
        store = cls(directory, RunManifest.from_json(manifest_path.read_text()))
        store._load()
        return store

    @classmethod
    def open_or_create(cls, directory: Path, manifest: RunManifest) -> "RecordStore":
        manifest_path = Path(directory) / MANIFEST_FILENAME
        if manifest_path.exists():
            store = cls.open(directory)
            if store.manifest.config_hash != manifest.config_hash:
                raise ValueError(
                    "existing store was produced by a different configuration "
                    f"(hash {store.manifest.config_hash} != {manifest.config_hash})"
                )
            return store
        return cls.create(directory, manifest)

    def _load(self) -> None:
        if not self.records_path.exists():
            self.records_path.touch()
            return
        raw = self.records_path.read_bytes()
        valid_end = 0
        for line in raw.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break  # torn tail from an interrupted append
            stripped = line.strip()
            if stripped:
                try:
                    record = EvaluationRecord.from_json_obj(json.loads(stripped))
                except (json.JSONDecodeError, KeyError, ValueError):
                    break
                self._records.append(record)
                self._keys.add(record.key)
            valid_end += len(line)
        if valid_end != len(raw):
            with open(self.records_path, "r+b") as fh:
                fh.truncate(valid_end)

    def append(self, record: EvaluationRecord) -> None:
        record.validate()
        with self._lock:
            if record.key in self._keys:
                raise DuplicateRecordError(f"duplicate record for {record.key}")
            line = json.dumps(record.to_json_obj(), sort_keys=True) + "\n"
            with open(self.records_path, "a", encoding="utf-8") as fh:
                fh.write(line)
            self._keys.add(record.key)
            self._records.append(record)

    def records(self) -> list[EvaluationRecord]:
        with self._lock:
            return list(self._records)

    def keys(self) -> set[tuple[int, str]]:
        with self._lock:
            return set(self._keys)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def finalize(self, finished_at: str) -> None:
        """Record the end timestamp; the only permitted manifest update."""
        self.manifest = replace(self.manifest, finished_at=finished_at)
        self.manifest_path.write_text(self.manifest.to_json())


def sorted_iou_curve(records: Iterable[EvaluationRecord | float]) -> list[float]:
    """IoU values sorted in descending order, one point per record."""
    values = [getattr(r, "iou", r) for r in records]
    return sorted(values, reverse=True)


@dataclass(frozen=True)
class SummaryRow:
    codec: str
    colorspace: str
    baseline_rate: float
    best_crf: int
    best_rate: float
    worst_crf: int
    worst_rate: float
    crf_rates: Mapping[int, float]


@dataclass(frozen=True)
class SummaryTable:
    baseline_rate: float
    iou_threshold: float
    rows: tuple[SummaryRow, ...]


def summarize(
    records: Sequence[EvaluationRecord], iou_threshold: float = 0.5
) -> SummaryTable:
    """Per-(codec, colorspace) match rates: baseline, per-CRF, best, worst.

    Best CRF is the argmax of the per-CRF match rate (ties to the lower,
    higher-quality CRF); the worst row reports the most lossy CRF present,
    which is 51 whenever the full range was swept.
    """
    baseline_records = [r for r in records if r.condition.is_baseline]
    if not baseline_records:
        raise ValueError("no baseline records; run the baseline first")
    baseline_rate = match_rate(baseline_records, iou_threshold)

    grouped: dict[tuple[str, str], dict[int, list[EvaluationRecord]]] = {}
    for record in records:
        if record.condition.is_baseline:
            continue
        cond = record.condition
        by_crf = grouped.setdefault((cond.codec, cond.colorspace), {})
        by_crf.setdefault(cond.crf, []).append(record)

    rows = []
    for (codec, colorspace), by_crf in sorted(grouped.items()):
        crf_rates = {
            crf: match_rate(recs, iou_threshold) for crf, recs in sorted(by_crf.items())
        }
        best_crf = max(crf_rates, key=lambda crf: (crf_rates[crf], -crf))
        worst_crf = max(crf_rates)
        rows.append(
            SummaryRow(
                codec=codec,
                colorspace=colorspace,
                baseline_rate=baseline_rate,
                best_crf=best_crf,
                best_rate=crf_rates[best_crf],
                worst_crf=worst_crf,
                worst_rate=crf_rates[worst_crf],
                crf_rates=crf_rates,
            )
        )
    return SummaryTable(
        baseline_rate=baseline_rate, iou_threshold=iou_threshold, rows=tuple(rows)
    )


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def _records_sort_key(record: EvaluationRecord):
    cond = record.condition
    if cond.is_baseline:
        return (0, "", "", -1, record.frame_id)
    return (1, cond.codec, cond.colorspace, cond.crf, record.frame_id)


def write_records_csv(records: Sequence[EvaluationRecord], path: Path) -> None:
    """All records in canonical order: baseline first, then by condition."""
    columns = [
        "frame_id",
        "condition",
        "codec",
        "crf",
        "colorspace",
        "iou",
        "confidence",
        "psnr_db",
        "encoded_bytes",
        "failed",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for record in sorted(records, key=_records_sort_key):
            cond = record.condition
            writer.writerow(
                [
                    record.frame_id,
                    cond.key(),
                    _format_cell(cond.codec),
                    _format_cell(cond.crf),
                    _format_cell(cond.colorspace),
                    _format_cell(record.iou),
                    _format_cell(record.confidence),
                    _format_cell(record.psnr_db),
                    _format_cell(record.encoded_bytes),
                    str(record.failed).lower(),
                ]
            )


def write_summary_csv(summary: SummaryTable, path: Path) -> None:
    crf_values = sorted({crf for row in summary.rows for crf in row.crf_rates})
    columns = [
        "codec",
        "colorspace",
        "baseline_match_rate",
        "best_crf",
        "best_match_rate",
        "worst_crf",
        "worst_match_rate",
        *[f"crf{crf:02d}" for crf in crf_values],
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in summary.rows:
            writer.writerow(
                [
                    row.codec,
                    row.colorspace,
                    _format_cell(row.baseline_rate),
                    row.best_crf,
                    _format_cell(row.best_rate),
                    row.worst_crf,
                    _format_cell(row.worst_rate),
                    *[_format_cell(row.crf_rates.get(crf)) for crf in crf_values],
                ]
            )


@dataclass(frozen=True)
class ChartSeries:
    """One curve on a chart: sorted IoU values plus styling."""

    name: str
    values: Sequence[float]
    color: str
    dasharray: str | None = None


def series_color(name: str) -> str:
    return SERIES_COLORS.get(name, "gray")


def render_curve_chart(
    series: Sequence[ChartSeries],
    title: str,
    path: Path,
    *,
    width: int = 960,
    height: int = 480,
) -> None:
    """Write a deterministic SVG line chart.

    Each series' raw values are embedded as an XML comment so the chart data
    stays machine-checkable. The x-axis is the frame rank after sorting IoU
    in descending order; a frame-number axis would be ambiguous once sorted.
    """
    margin_left, margin_right, margin_top, margin_bottom = 60, 220, 40, 50
    plot_w = width - margin_left - margin_right
    plot_h = height - margin_top - margin_bottom

    def x_pos(i: int, n: int) -> float:
        if n <= 1:
            return margin_left + plot_w / 2
        return margin_left + plot_w * i / (n - 1)

    def y_pos(v: float) -> float:
        return margin_top + plot_h * (1.0 - v)

    lines: list[str] = []
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    lines.append(f"<!-- {title} -->")
    for s in series:
        values = ",".join(repr(float(v)) for v in s.values)
        lines.append(f'<!-- series name="{s.name}" n="{len(s.values)}" values="{values}" -->')
    lines.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    lines.append(
        f'<text x="{margin_left}" y="24" font-family="sans-serif" font-size="16">'
        f"{title}</text>"
    )
    # Horizontal gridlines at IoU 0, 0.25, 0.5, 0.75, 1.
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y_pos(tick)
        lines.append(
            f'<line x1="{margin_left}" y1="{y:.2f}" x2="{margin_left + plot_w}" '
            f'y2="{y:.2f}" stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{margin_left - 8}" y="{y + 4:.2f}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end">{tick:g}</text>'
        )
    lines.append(
        f'<line x1="{margin_left}" y1="{margin_top}" x2="{margin_left}" '
        f'y2="{margin_top + plot_h}" stroke="black" stroke-width="1"/>'
    )
    lines.append(
        f'<line x1="{margin_left}" y1="{margin_top + plot_h}" '
        f'x2="{margin_left + plot_w}" y2="{margin_top + plot_h}" '
        f'stroke="black" stroke-width="1"/>'
    )
    lines.append(
        f'<text x="{margin_left + plot_w / 2:.0f}" y="{height - 12}" '
        f'font-family="sans-serif" font-size="12" text-anchor="middle">'
        f"frame rank (IoU sorted descending)</text>"
    )
    lines.append(
        f'<text x="16" y="{margin_top + plot_h / 2:.0f}" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {margin_top + plot_h / 2:.0f})" '
        f'text-anchor="middle">IoU</text>'
    )
    for s in series:
        n = len(s.values)
        if n == 0:
            continue
        points = " ".join(
            f"{x_pos(i, n):.2f},{y_pos(v):.2f}" for i, v in enumerate(s.values)
        )
        dash = f' stroke-dasharray="{s.dasharray}"' if s.dasharray else ""
        lines.append(
            f'<polyline fill="none" stroke="{s.color}" stroke-width="1.5"{dash} '
            f'points="{points}"/>'
        )
    # Legend on the right.
    for idx, s in enumerate(series):
        y = margin_top + 16 * idx
        dash = f' stroke-dasharray="{s.dasharray}"' if s.dasharray else ""
        x0 = margin_left + plot_w + 16
        lines.append(
            f'<line x1="{x0}" y1="{y + 6}" x2="{x0 + 28}" y2="{y + 6}" '
            f'stroke="{s.color}" stroke-width="2"{dash}/>'
        )
        lines.append(
            f'<text x="{x0 + 34}" y="{y + 10}" font-family="sans-serif" '
            f'font-size="11">{s.name}</text>'
        )
    lines.append("</svg>")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_chart_series(
    records: Sequence[EvaluationRecord], summary: SummaryTable, colorspace: str
) -> list[ChartSeries]:
    """Baseline curve plus best-CRF and worst-CRF curves per codec."""
    series = [
        ChartSeries(
            name="baseline",
            values=sorted_iou_curve([r for r in records if r.condition.is_baseline]),
            color=series_color("baseline"),
        )
    ]
    for row in summary.rows:
        if row.colorspace != colorspace:
            continue
        for crf, label, dash in (
            (row.best_crf, "best", None),
            (row.worst_crf, "worst", "6 4"),
        ):
            condition = Condition.degraded(row.codec, crf, colorspace)
            curve = sorted_iou_curve(
                [r for r in records if r.condition == condition]
            )
            series.append(
                ChartSeries(
                    name=f"{row.codec} {label} (crf {crf})",
                    values=curve,
                    color=series_color(row.codec),
                    dasharray=dash,
                )
            )
    return series


def render_report(
    records: Sequence[EvaluationRecord],
    summary: SummaryTable,
    output_dir: Path,
) -> list[Path]:
    """Emit records.csv, summary.csv, and one curve chart per colorspace."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    records_csv = output_dir / "records.csv"
    write_records_csv(records, records_csv)
    outputs.append(records_csv)

    summary_csv = output_dir / "summary.csv"
    write_summary_csv(summary, summary_csv)
    outputs.append(summary_csv)

    colorspaces = sorted({row.colorspace for row in summary.rows})
    if not colorspaces:
        colorspaces = ["rgb"]  # baseline-only run still gets a chart
    for colorspace in colorspaces:
        chart_path = output_dir / f"curve_{colorspace}.svg"
        series = build_chart_series(records, summary, colorspace)
        render_curve_chart(
            series, f"IoU per frame, sorted descending ({colorspace})", chart_path
        )
        outputs.append(chart_path)
    return outputs
