"""Command-line front end.

Subcommands: ``convert-labels``, ``baseline``, ``sweep``, ``report``,
``validate-config``. A TOML file (``--config``) defines the run; individual
fields can be overridden by flags. Progress goes to stderr; machine-readable
output goes only to files in the output directory.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, normalize_colorspace, parse_crf_spec
from .pipeline import (
    PipelineError,
    convert_labels,
    run_baseline,
    run_report,
    run_sweep_command,
)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the TOML run config")
    common.add_argument("--images", help="override: KITTI image directory")
    common.add_argument("--labels", help="override: KITTI label directory")
    common.add_argument("--output", help="override: output directory")
    common.add_argument("--workers", type=int, help="override: worker count")
    common.add_argument("--seed", type=int, help="override: mock adapter seed")
    common.add_argument(
        "--codec",
        action="append",
        dest="codecs",
        metavar="ID",
        help="restrict the sweep to this codec (repeatable)",
    )
    common.add_argument("--crf", help="restrict the CRF range, e.g. 0..51 or 17")
    common.add_argument(
        "--colorspace",
        action="append",
        dest="colorspaces",
        choices=["rgb", "gray", "grayscale"],
        help="restrict to one colorspace (repeatable)",
    )

    parser = argparse.ArgumentParser(
        prog="degrade-bench",
        description=(
            "Measure how lossy video-codec degradation changes pedestrian-"
            "detection performance."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser(
        "convert-labels",
        parents=[common],
        help="convert KITTI labels to YOLO format and select the subset",
    )
    sub.add_parser(
        "baseline", parents=[common], help="evaluate the detector on original frames"
    )
    sub.add_parser(
        "sweep", parents=[common], help="run the codec x CRF x colorspace sweep"
    )
    sub.add_parser(
        "report", parents=[common], help="emit CSV summaries and IoU curve charts"
    )
    sub.add_parser(
        "validate-config", parents=[common], help="check the run configuration"
    )
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    colorspaces = args.colorspaces
    if colorspaces is not None:
        colorspaces = [normalize_colorspace(c) for c in colorspaces]
    return {
        "images": args.images,
        "labels": args.labels,
        "output": args.output,
        "workers": args.workers,
        "seed": args.seed,
        "codecs": args.codecs,
        "crf": parse_crf_spec(args.crf) if args.crf is not None else None,
        "colorspaces": colorspaces,
    }


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "validate-config":
            print("configuration OK")
            print(f"config hash: {config.config_hash()}")
            return 0
        if args.command == "convert-labels":
            convert_labels(config)
            return 0
        if args.command == "baseline":
            run_baseline(config)
            return 0
        if args.command == "sweep":
            run_sweep_command(config)
            return 0
        if args.command == "report":
            run_report(config)
            return 0
    except (PipelineError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
