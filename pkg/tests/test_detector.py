import pytest

from degrade_bench.detector import (
    Detection,
    DetectorError,
    DetectorHandle,
    MatchResult,
    MockDetector,
    PROTOCOL_VERSION,
    ProtocolDetectorClient,
    match_single_ground_truth,
)
from degrade_bench.metrics import BoundingBox, iou

from conftest import proto_server_cmd

GT = BoundingBox(0, 0, 10, 10)


def det(x1, y1, x2, y2, conf=0.9, cls="Pedestrian") -> Detection:
    return Detection(class_name=cls, box=BoundingBox(x1, y1, x2, y2), confidence=conf)


class TestMatchSingleGroundTruth:
    def test_no_detections(self):
        result = match_single_ground_truth([], GT)
        assert result == MatchResult(matched=False, iou=0.0)
        assert result.confidence is None and result.chosen_index is None

    def test_single_good_detection(self):
        result = match_single_ground_truth([det(0, 0, 10, 6, conf=0.9)], GT)
        assert result.matched
        assert result.iou == pytest.approx(0.6)
        assert result.confidence == 0.9
        assert result.chosen_index == 0

    def test_max_iou_wins_over_confidence(self):
        low_conf_good = det(0, 0, 10, 7, conf=0.6)  # IoU 0.7
        high_conf_bad = det(0, 0, 10, 3, conf=0.95)  # IoU 0.3
        result = match_single_ground_truth([low_conf_good, high_conf_bad], GT)
        assert result.matched
        assert result.iou == pytest.approx(0.7)
        assert result.chosen_index == 0

    def test_confidence_threshold_excludes(self):
        result = match_single_ground_truth([det(0, 0, 10, 10, conf=0.4)], GT)
        assert not result.matched and result.iou == 0.0

    def test_confidence_threshold_inclusive(self):
        result = match_single_ground_truth([det(0, 0, 10, 10, conf=0.5)], GT)
        assert result.matched and result.iou == 1.0

    def test_other_classes_ignored(self):
        result = match_single_ground_truth(
            [det(0, 0, 10, 10, cls="Car"), det(0, 0, 10, 5)], GT
        )
        assert result.iou == pytest.approx(0.5)
        assert result.chosen_index == 1

    def test_tie_breaks_higher_confidence_then_lower_index(self):
        a = det(0, 0, 10, 5, conf=0.7)
        b = det(0, 5, 10, 10, conf=0.8)  # same IoU 0.5
        result = match_single_ground_truth([a, b], GT)
        assert result.chosen_index == 1
        c = det(0, 5, 10, 10, conf=0.8)
        result = match_single_ground_truth([b, c], GT)
        assert result.chosen_index == 0

    def test_eligible_but_disjoint_detection(self):
        result = match_single_ground_truth([det(50, 50, 60, 60)], GT)
        assert not result.matched
        assert result.iou == 0.0
        assert result.chosen_index == 0  # eligible detection chosen, just no overlap

    def test_permutation_invariance(self):
        dets = [det(0, 0, 10, 7, conf=0.6), det(0, 0, 10, 3, conf=0.95), det(2, 0, 12, 10)]
        base = match_single_ground_truth(dets, GT)
        shuffled = match_single_ground_truth(list(reversed(dets)), GT)
        assert base.iou == shuffled.iou and base.matched == shuffled.matched

    def test_raising_conf_threshold_never_raises_iou(self):
        dets = [det(0, 0, 10, 7, conf=0.6), det(0, 0, 10, 9, conf=0.9)]
        previous = 1.0
        for threshold in (0.0, 0.5, 0.7, 0.95):
            result = match_single_ground_truth(dets, GT, conf_threshold=threshold)
            assert result.iou <= previous + 1e-15
            previous = result.iou

    def test_never_exceeds_best_eligible_iou(self):
        dets = [det(0, 0, 10, 4), det(1, 1, 9, 9), det(0, 0, 5, 10)]
        best = max(iou(d.box, GT) for d in dets)
        result = match_single_ground_truth(dets, GT)
        assert result.iou == pytest.approx(best)


class TestMockDetector:
    def test_echo_gt(self):
        mock = MockDetector("echo_gt", {1: GT})
        [detection] = mock.detect("img.png", 1, "baseline/000001")
        assert detection.box == GT
        assert detection.confidence == 1.0
        assert detection.class_name == "Pedestrian"

    def test_offset(self):
        mock = MockDetector("offset", {1: GT}, offset=(5.0, 0.0))
        [detection] = mock.detect("img.png", 1, "k")
        assert detection.box == BoundingBox(5, 0, 15, 10)
        # IoU of a (5,0) shift on a 10x10 box is 1/3
        assert iou(detection.box, GT) == pytest.approx(1 / 3)

    def test_silent(self):
        mock = MockDetector("silent", {1: GT})
        assert mock.detect("img.png", 1, "k") == []

    def test_unknown_frame_returns_nothing(self):
        mock = MockDetector("echo_gt", {1: GT})
        assert mock.detect("img.png", 99, "k") == []

    def test_noisy_is_deterministic_per_request_key(self):
        mock = MockDetector("noisy", {1: GT}, seed=42)
        first = mock.detect("a.png", 1, "h264/rgb/crf07/000001")
        second = mock.detect("b.png", 1, "h264/rgb/crf07/000001")
        assert first == second
        other = mock.detect("a.png", 1, "h264/rgb/crf08/000001")
        assert other != first

    def test_noisy_seed_changes_output(self):
        a = MockDetector("noisy", {1: GT}, seed=1).detect("a.png", 1, "k")
        b = MockDetector("noisy", {1: GT}, seed=2).detect("a.png", 1, "k")
        assert a != b

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            MockDetector("oracle", {})


class TestDetectorHandle:
    def test_handshake_and_detection(self):
        handle = DetectorHandle(
            proto_server_cmd("--box", "1,2,11,22,0.75,person"), timeout=10
        )
        try:
            detections = handle.detect("/tmp/whatever.png", "req-1")
            assert handle.handshake_info["version"] == PROTOCOL_VERSION
            assert len(detections) == 1
            assert detections[0].class_name == "person"
            assert detections[0].box == BoundingBox(1, 2, 11, 22)
            assert detections[0].confidence == 0.75
        finally:
            handle.shutdown()

    def test_empty_detections(self):
        handle = DetectorHandle(proto_server_cmd(), timeout=10)
        try:
            assert handle.detect("/tmp/img.png", "req-2") == []
        finally:
            handle.shutdown()

    def test_bad_version_handshake_fails(self):
        handle = DetectorHandle(proto_server_cmd("--bad-version"), timeout=10, retries=0)
        try:
            with pytest.raises(DetectorError):
                handle.detect("/tmp/img.png", "req-3")
        finally:
            handle.shutdown()

    def test_recovers_from_process_death(self):
        handle = DetectorHandle(proto_server_cmd("--die-after", "1"), timeout=10, retries=2)
        try:
            assert handle.detect("/tmp/a.png", "r1") == []
            # Server exited after the first response; the retry respawns it.
            assert handle.detect("/tmp/b.png", "r2") == []
        finally:
            handle.shutdown()

    def test_garbage_response_triggers_restart(self, tmp_path):
        handle = DetectorHandle(
            proto_server_cmd(
                "--garbage-first", "--state-file", str(tmp_path / "poison")
            ),
            timeout=10,
            retries=2,
        )
        try:
            assert handle.detect("/tmp/a.png", "r1") == []
        finally:
            handle.shutdown()

    def test_mismatched_id_triggers_restart(self, tmp_path):
        handle = DetectorHandle(
            proto_server_cmd(
                "--wrong-id-first", "--state-file", str(tmp_path / "poison")
            ),
            timeout=10,
            retries=2,
        )
        try:
            assert handle.detect("/tmp/a.png", "r1") == []
        finally:
            handle.shutdown()

    def test_timeout_surfaces_after_retries(self):
        handle = DetectorHandle(
            proto_server_cmd("--hang-after", "0"), timeout=1.0, retries=1
        )
        try:
            with pytest.raises(DetectorError) as err:
                handle.detect("/tmp/a.png", "r-timeout")
            assert err.value.request_id == "r-timeout"
        finally:
            handle.shutdown()

    def test_error_response_carries_request_id_without_restart(self):
        handle = DetectorHandle(proto_server_cmd("--check-image"), timeout=10)
        try:
            with pytest.raises(DetectorError) as err:
                handle.detect("/definitely/missing.png", "r-err")
            assert err.value.request_id == "r-err"
            assert "unreadable" in str(err.value)
            assert handle.healthy  # per-request error, server stays up
        finally:
            handle.shutdown()

    def test_launch_failure(self):
        handle = DetectorHandle(["/nonexistent/detector-binary"], timeout=5, retries=0)
        with pytest.raises(DetectorError):
            handle.detect("/tmp/a.png", "r1")


class TestProtocolDetectorClient:
    def test_class_map_applied(self):
        client = ProtocolDetectorClient(
            proto_server_cmd("--box", "0,0,10,10,0.9,person"),
            class_map={"person": "Pedestrian"},
            timeout=10,
        )
        try:
            [detection] = client.detect("/tmp/a.png", 1, "key")
            assert detection.class_name == "Pedestrian"
        finally:
            client.close()
