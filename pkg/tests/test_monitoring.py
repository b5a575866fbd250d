"""
Tests for training monitoring
"""

import json
import math

import pytest

from otalign.monitoring import StepRecord, TrainingLog, TrainingMonitor


def rec(step, epoch, total, ccot=None, emb=None, hid=None):
    return StepRecord(step=step, epoch=epoch, ce=total, kd=None, ccot=ccot, emb_ot=emb, hid_ot=hid, total=total)


class TestStepRecord:
    """Test StepRecord dataclass"""

    def test_to_dict_fields(self):
        data = rec(3, 1, 2.0).to_dict()
        assert list(data) == ["step", "ce", "kd", "ccot", "emb_ot", "hid_ot", "total"]
        assert data["kd"] is None

    def test_ot_sum(self):
        assert rec(0, 0, 1.0, ccot=0.5, emb=0.2, hid=0.3).ot == pytest.approx(0.5)
        assert rec(0, 0, 1.0).ot is None


class TestTrainingMonitor:
    """Test TrainingMonitor class"""

    def test_empty_summary(self):
        assert "message" in TrainingMonitor(2).get_summary()

    def test_epoch_averages(self):
        monitor = TrainingMonitor(2)
        for step, total in enumerate([4.0, 2.0, 1.0, 3.0]):
            monitor.record(rec(step, step // 2, total))
        assert monitor.epoch_averages("total") == [3.0, 2.0]
        assert monitor.epoch_average(0, "kd") is None
        assert monitor.epoch_average(5, "total") is None

    def test_summary(self):
        monitor = TrainingMonitor(1)
        monitor.record(rec(0, 0, 5.0, ccot=1.0, emb=0.4, hid=0.6))
        monitor.record(rec(1, 1, 2.0, ccot=0.5, emb=0.2, hid=0.3))
        summary = monitor.get_summary()
        assert summary["steps"] == 2 and summary["epochs"] == 2
        assert summary["initial_total"] == 5.0
        assert summary["final_total"] == 2.0
        assert summary["final_ot"] == pytest.approx(0.5)
        assert summary["initial_kd"] is None
        assert summary["finite"] is True

    def test_non_finite_summary(self):
        monitor = TrainingMonitor(1)
        monitor.record(rec(0, 0, float("nan")))
        assert monitor.get_summary()["finite"] is False

    def test_callback_and_file(self, tmp_path):
        seen = []
        path = tmp_path / "records.jsonl"
        monitor = TrainingMonitor(2, records_file=str(path), on_record=seen.append)
        monitor.record(rec(0, 0, 1.5))
        monitor.record(rec(1, 0, 0.5))
        assert [r.step for r in seen] == [0, 1]
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert [line["total"] for line in lines] == [1.5, 0.5]

    def test_build_log(self):
        monitor = TrainingMonitor(1)
        monitor.record(rec(0, 0, float("nan")))
        log = monitor.build_log(aborted=True, abort_step=0)
        assert isinstance(log, TrainingLog)
        assert log.summary["aborted"] is True
        assert log.abort_step == 0
        assert math.isnan(log.component("total")[0])
        assert log.to_dict()["aborted"] is True
