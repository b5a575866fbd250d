"""
Training monitoring for toy distillation runs.

Records one StepRecord per optimizer step, aggregates them into epoch
windows, and can append every record to a JSONL file as it arrives.
"""

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)

COMPONENTS = ("ce", "kd", "ccot", "emb_ot", "hid_ot", "total")


@dataclass
class StepRecord:
    """
    Loss components of one training step (batch means).

    ``kd``, ``ccot``, ``emb_ot`` and ``hid_ot`` are None when the
    corresponding term was not evaluated.
    """
    step: int
    epoch: int
    ce: float
    kd: Optional[float]
    ccot: Optional[float]
    emb_ot: Optional[float]
    hid_ot: Optional[float]
    total: float

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization"""
        return {
            "step": self.step,
            "ce": self.ce,
            "kd": self.kd,
            "ccot": self.ccot,
            "emb_ot": self.emb_ot,
            "hid_ot": self.hid_ot,
            "total": self.total,
        }

    @property
    def ot(self) -> Optional[float]:
        """Combined OT alignment value (embedding + hidden)."""
        if self.emb_ot is None or self.hid_ot is None:
            return None
        return self.emb_ot + self.hid_ot


@dataclass
class TrainingLog:
    """Everything a training run produced."""
    records: List[StepRecord] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    aborted: bool = False
    abort_step: Optional[int] = None

    def component(self, name: str) -> List[Optional[float]]:
        """Per-step trace of one component."""
        return [getattr(r, name) for r in self.records]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "records": [r.to_dict() for r in self.records],
            "summary": self.summary,
            "aborted": self.aborted,
            "abort_step": self.abort_step,
        }


class TrainingMonitor:
    """
    Collects step records and epoch-window statistics.

    Args:
        steps_per_epoch: Window size for epoch averages
        records_file: Optional JSONL file; each record is appended as recorded
        on_record: Optional callback invoked with every record
    """

    def __init__(
        self,
        steps_per_epoch: int,
        records_file: Optional[str] = None,
        on_record: Optional[Callable[[StepRecord], None]] = None,
    ):
        self.steps_per_epoch = max(1, int(steps_per_epoch))
        self.records_file = Path(records_file) if records_file else None
        self.on_record = on_record
        self.records: List[StepRecord] = []
        self._epoch_sums: Dict[int, Dict[str, float]] = defaultdict(lambda: defaultdict(float))
        self._epoch_counts: Dict[int, Dict[str, int]] = defaultdict(lambda: defaultdict(int))

    def record(self, rec: StepRecord) -> None:
        """Record one step."""
        self.records.append(rec)
        for name in COMPONENTS + ("ot",):
            value = getattr(rec, name)
            if value is not None:
                self._epoch_sums[rec.epoch][name] += value
                self._epoch_counts[rec.epoch][name] += 1

        if rec.step % self.steps_per_epoch == self.steps_per_epoch - 1:
            logger.info(
                "Epoch %d done at step %d: total=%.6f ce=%.6f",
                rec.epoch, rec.step,
                self.epoch_average(rec.epoch, "total"),
                self.epoch_average(rec.epoch, "ce"),
            )

        if self.records_file:
            self._persist(rec)
        if self.on_record:
            self.on_record(rec)

    def epoch_average(self, epoch: int, name: str) -> Optional[float]:
        """Mean of a component over one epoch, None if it was never evaluated."""
        count = self._epoch_counts.get(epoch, {}).get(name, 0)
        if count == 0:
            return None
        return self._epoch_sums[epoch][name] / count

    def epoch_averages(self, name: str) -> List[Optional[float]]:
        """Epoch means of a component, in epoch order."""
        return [self.epoch_average(e, name) for e in sorted(self._epoch_counts)]

    def get_summary(self) -> Dict[str, Any]:
        """
        Get summary statistics.

        Returns:
            Dictionary with first/final epoch averages per component
        """
        if not self.records:
            return {"message": "No steps recorded yet"}

        summary: Dict[str, Any] = {
            "steps": len(self.records),
            "epochs": len(self._epoch_counts),
        }
        for name in COMPONENTS + ("ot",):
            trace = [v for v in self.epoch_averages(name) if v is not None]
            summary[f"initial_{name}"] = trace[0] if trace else None
            summary[f"final_{name}"] = trace[-1] if trace else None
        final_total = summary["final_total"]
        summary["finite"] = final_total is not None and math.isfinite(final_total)
        return summary

    def build_log(self, aborted: bool = False, abort_step: Optional[int] = None) -> TrainingLog:
        """Package the recorded steps into a TrainingLog."""
        summary = self.get_summary()
        summary["aborted"] = aborted
        return TrainingLog(records=list(self.records), summary=summary, aborted=aborted, abort_step=abort_step)

    def _persist(self, rec: StepRecord) -> None:
        """Append one record to the JSONL file."""
        if not self.records_file:
            return
        with open(self.records_file, "a") as f:
            f.write(json.dumps(rec.to_dict()) + "\n")


__all__ = ["StepRecord", "TrainingLog", "TrainingMonitor"]
