import json
import math

import pytest

from degrade_bench.cli import main
from degrade_bench.config import ConfigError, load_config, parse_crf_spec
from degrade_bench.metrics import iou
from degrade_bench.pipeline import load_ground_truth, load_selection
from degrade_bench.results import RecordStore

from conftest import build_kitti_dataset, kitti_line, proto_server_cmd, write_config


@pytest.fixture
def run_env(tmp_path, synth_dataset):
    images_dir, labels_dir = synth_dataset
    output_dir = tmp_path / "out"
    config_path = write_config(
        tmp_path / "run.toml",
        images_dir,
        labels_dir,
        output_dir,
        crf="0..2",
        colorspaces=("rgb",),
        workers=2,
    )
    return config_path, output_dir


def run_cli(command, config_path, *extra) -> int:
    return main([command, "--config", str(config_path), *extra])


class TestConfig:
    def test_parse_crf_spec(self):
        assert parse_crf_spec("0..3") == (0, 1, 2, 3)
        assert parse_crf_spec("17") == (17,)
        assert parse_crf_spec(5) == (5,)
        assert parse_crf_spec([1, 2]) == (1, 2)
        with pytest.raises(ConfigError):
            parse_crf_spec("9..3")

    def test_load_and_validate(self, run_env):
        config_path, output_dir = run_env
        config = load_config(config_path)
        assert config.output_dir == output_dir
        assert config.crf_values == (0, 1, 2)
        assert config.colorspaces == ("rgb",)
        assert config.detector.mode == "echo_gt"

    def test_overrides_win(self, run_env):
        config_path, _ = run_env
        config = load_config(
            config_path,
            {"workers": 5, "crf": (7,), "codecs": ["mock_identity"], "seed": 9},
        )
        assert config.workers == 5
        assert config.crf_values == (7,)
        assert config.codecs == ("mock_identity",)
        assert config.seed == 9

    def test_hash_ignores_runtime_knobs(self, run_env):
        config_path, _ = run_env
        base = load_config(config_path)
        tweaked = load_config(
            config_path, {"workers": 8, "crf": (0,), "codecs": ["mock_identity"]}
        )
        assert base.config_hash() == tweaked.config_hash()
        reseeded = load_config(config_path, {"seed": 123})
        assert base.config_hash() != reseeded.config_hash()

    def test_invalid_thresholds_and_workers_rejected(self, run_env):
        config_path, _ = run_env
        with pytest.raises(ConfigError, match="confidence_threshold"):
            load_config(config_path, {"confidence_threshold": 1.5})
        with pytest.raises(ConfigError, match="workers"):
            load_config(config_path, {"workers": 0})
        with pytest.raises(ConfigError, match="CRF"):
            load_config(config_path, {"crf": (77,)})

    def test_missing_codec_command_rejected(self, tmp_path, synth_dataset):
        images_dir, labels_dir = synth_dataset
        config_path = write_config(
            tmp_path / "bad.toml", images_dir, labels_dir, tmp_path / "out",
            codecs=("h264",),
        )
        with pytest.raises(ConfigError, match="codec"):
            load_config(config_path)

    def test_validate_config_subcommand(self, run_env, capsys):
        config_path, _ = run_env
        assert run_cli("validate-config", config_path) == 0
        out = capsys.readouterr().out
        assert "configuration OK" in out


class TestConvertLabels:
    def test_writes_annotations_and_selection(self, run_env):
        config_path, output_dir = run_env
        assert run_cli("convert-labels", config_path) == 0
        selection = (output_dir / "selection.txt").read_text().splitlines()
        assert selection == ["000000", "000001", "000002", "000003", "000004"]
        ann = (output_dir / "annotations" / "000002.txt").read_text().splitlines()
        assert len(ann) == 1  # only the pedestrian is mapped
        assert ann[0].startswith("0 ")
        # frame 5 (two pedestrians) still has its annotation file, two lines
        ann5 = (output_dir / "annotations" / "000005.txt").read_text().splitlines()
        assert len(ann5) == 2

    def test_no_pedestrians_gives_empty_selection(self, tmp_path):
        root = tmp_path / "carsonly"
        images_dir, labels_dir = build_kitti_dataset(root, frame_specs=[(0, 48, [])])
        (labels_dir / "000000.txt").write_text(kitti_line("Car", 0, 0, 30, 30) + "\n")
        config_path = write_config(
            tmp_path / "cars.toml", images_dir, labels_dir, tmp_path / "out"
        )
        assert run_cli("convert-labels", config_path) == 0
        assert (tmp_path / "out" / "selection.txt").read_text() == ""

    def test_idempotent_outputs(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        first = (output_dir / "annotations" / "000000.txt").read_bytes()
        selection_first = (output_dir / "selection.txt").read_bytes()
        run_cli("convert-labels", config_path)
        assert (output_dir / "annotations" / "000000.txt").read_bytes() == first
        assert (output_dir / "selection.txt").read_bytes() == selection_first


class TestBaseline:
    def test_echo_gt_gives_perfect_iou(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        assert run_cli("baseline", config_path) == 0
        store = RecordStore.open(output_dir)
        records = store.records()
        assert len(records) == 5
        assert all(r.condition.is_baseline for r in records)
        assert all(r.iou == 1.0 and r.confidence == 1.0 for r in records)
        assert all(r.psnr_db is None and r.encoded_bytes is None for r in records)

    def test_silent_detector_gives_zero(self, tmp_path, synth_dataset):
        images_dir, labels_dir = synth_dataset
        config_path = write_config(
            tmp_path / "run.toml", images_dir, labels_dir, tmp_path / "out",
            detector_lines=('mode = "silent"',),
        )
        run_cli("convert-labels", config_path)
        assert run_cli("baseline", config_path) == 0
        records = RecordStore.open(tmp_path / "out").records()
        assert all(r.iou == 0.0 and r.confidence is None for r in records)

    def test_offset_detector_matches_metrics_oracle(self, tmp_path, synth_dataset):
        images_dir, labels_dir = synth_dataset
        config_path = write_config(
            tmp_path / "run.toml", images_dir, labels_dir, tmp_path / "out",
            detector_lines=('mode = "offset"', "offset = [5.0, 0.0]"),
        )
        run_cli("convert-labels", config_path)
        assert run_cli("baseline", config_path) == 0
        config = load_config(config_path)
        frames = load_selection(config)
        ground_truth = load_ground_truth(config, frames)
        records = {r.frame_id: r for r in RecordStore.open(tmp_path / "out").records()}
        from degrade_bench.metrics import BoundingBox

        for frame in frames:
            gt = ground_truth[frame.frame_id]
            shifted = BoundingBox(gt.x_min + 5, gt.y_min, gt.x_max + 5, gt.y_max)
            assert records[frame.frame_id].iou == pytest.approx(iou(shifted, gt))

    def test_rerun_skips_existing(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        first = (output_dir / "records.jsonl").read_bytes()
        assert run_cli("baseline", config_path) == 0
        assert (output_dir / "records.jsonl").read_bytes() == first

    def test_baseline_requires_selection(self, run_env, capsys):
        config_path, _ = run_env
        assert run_cli("baseline", config_path) == 1
        assert "convert-labels" in capsys.readouterr().err

    def test_protocol_detector_backend(self, tmp_path, synth_dataset):
        images_dir, labels_dir = synth_dataset
        server = " ".join(proto_server_cmd("--box", "46,8,98,40,0.9,person"))
        config_path = write_config(
            tmp_path / "run.toml", images_dir, labels_dir, tmp_path / "out",
            detector_lines=(
                f'command = "{server}"',
                "[detector.class_map]",
                'person = "Pedestrian"',
            ),
        )
        run_cli("convert-labels", config_path)
        assert run_cli("baseline", config_path) == 0
        records = RecordStore.open(tmp_path / "out").records()
        assert len(records) == 5
        assert all(r.confidence == 0.9 for r in records)
        # frame 1 ground truth is exactly (46, 8, 98, 48); overlap is real
        assert any(r.iou > 0.5 for r in records)


class TestSweepAndReport:
    def test_sweep_produces_full_grid(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        assert run_cli("sweep", config_path) == 0
        records = RecordStore.open(output_dir).records()
        degraded = [r for r in records if not r.condition.is_baseline]
        assert len(degraded) == 5 * 2 * 3 * 1  # frames x codecs x crfs x colorspaces
        assert all(not r.failed for r in degraded)
        identity = [r for r in degraded if r.condition.codec == "mock_identity"]
        assert all(math.isinf(r.psnr_db) for r in identity)
        assert all(r.iou == 1.0 for r in degraded)  # echo_gt detector

    def test_sweep_requires_baseline(self, run_env, capsys):
        config_path, _ = run_env
        run_cli("convert-labels", config_path)
        assert run_cli("sweep", config_path) == 1
        assert "baseline" in capsys.readouterr().err

    def test_sweep_rerun_adds_nothing(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        run_cli("sweep", config_path)
        first = sorted((output_dir / "records.jsonl").read_text().splitlines())
        assert run_cli("sweep", config_path) == 0
        second = sorted((output_dir / "records.jsonl").read_text().splitlines())
        assert first == second

    def test_sweep_dimension_filters(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        assert run_cli("sweep", config_path, "--codec", "mock_identity", "--crf", "0..1") == 0
        records = RecordStore.open(output_dir).records()
        degraded = [r for r in records if not r.condition.is_baseline]
        assert {r.condition.codec for r in degraded} == {"mock_identity"}
        assert {r.condition.crf for r in degraded} == {0, 1}

    def test_failure_cap_exceeded_exits_nonzero(self, tmp_path, synth_dataset, capsys):
        from conftest import stub_codec_templates

        images_dir, labels_dir = synth_dataset
        encode, decode = stub_codec_templates(mode="fail")
        config_path = write_config(
            tmp_path / "run.toml", images_dir, labels_dir, tmp_path / "out",
            codecs=("h264",),
            crf="0..1",
            colorspaces=("rgb",),
            extra=(
                "\n[codec.h264]\n"
                f'encode = "{encode}"\n'
                f'decode = "{decode}"\n'
                'extension = "stub"\n'
            ),
        )
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        assert run_cli("sweep", config_path) == 1
        assert "failure fraction" in capsys.readouterr().err
        records = RecordStore.open(tmp_path / "out").records()
        degraded = [r for r in records if not r.condition.is_baseline]
        assert len(degraded) == 10
        assert all(r.failed and r.iou == 0.0 for r in degraded)

    def test_command_codec_through_sweep(self, tmp_path, synth_dataset):
        from conftest import stub_codec_templates

        images_dir, labels_dir = synth_dataset
        encode, decode = stub_codec_templates(mode="zlib")
        config_path = write_config(
            tmp_path / "run.toml", images_dir, labels_dir, tmp_path / "out",
            codecs=("av1",),
            crf="0",
            colorspaces=("rgb",),
            extra=(
                "\n[codec.av1]\n"
                f'encode = "{encode}"\n'
                f'decode = "{decode}"\n'
                'extension = "stub"\n'
                'version = "stub-av1 0.0"\n'
            ),
        )
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        assert run_cli("sweep", config_path) == 0
        store = RecordStore.open(tmp_path / "out")
        degraded = [r for r in store.records() if not r.condition.is_baseline]
        assert len(degraded) == 5
        assert all(math.isinf(r.psnr_db) for r in degraded)  # zlib stub is lossless
        assert all(r.encoded_bytes > 0 for r in degraded)
        assert store.manifest.codec_versions["av1"] == "stub-av1 0.0"

    def test_report_outputs_and_rerun_identical(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        run_cli("sweep", config_path)
        assert run_cli("report", config_path) == 0
        report_dir = output_dir / "report"
        names = {p.name for p in report_dir.iterdir()}
        assert names == {"records.csv", "summary.csv", "curve_rgb.svg"}
        first = {name: (report_dir / name).read_bytes() for name in names}
        assert run_cli("report", config_path) == 0
        for name in names:
            assert (report_dir / name).read_bytes() == first[name]

    def test_report_requires_baseline(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        assert run_cli("report", config_path) == 1

    def test_manifest_provenance(self, run_env):
        config_path, output_dir = run_env
        run_cli("convert-labels", config_path)
        run_cli("baseline", config_path)
        run_cli("sweep", config_path)
        manifest = json.loads((output_dir / "manifest.json").read_text())
        assert manifest["codec_versions"] == {
            "mock_identity": "builtin",
            "mock_quantizer": "builtin",
        }
        assert manifest["thresholds"] == {"confidence": 0.5, "iou": 0.5}
        assert manifest["detector"]["mode"] == "echo_gt"
        assert manifest["started_at"]
        assert manifest["finished_at"]  # set when the sweep completed
