"""
End-to-end checks: solver agreement at scale, a full default distillation
run and the ablation sweep.

Run with: pytest tests/integration -m slow
"""

import math
import time

import numpy as np
import pytest

from otalign.core.oracles import exact_ot
from otalign.core.transport import SinkhornConfig, sinkhorn, uniform_measure
from otalign.distill.trainer import TrainConfig, run_ablations, train_run
from otalign.monitoring import TrainingMonitor


@pytest.mark.integration
@pytest.mark.slow
class TestEntropicGap:
    """Sinkhorn cost approaches the exact cost as lambda grows"""

    def test_gap_shrinks_to_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n, m = (int(k) for k in rng.integers(2, 7, size=2))
            c = rng.uniform(size=(n, m))
            a, b = uniform_measure(n), uniform_measure(m)
            exact = exact_ot(c, a, b).cost
            gaps = [sinkhorn(c, a, b, SinkhornConfig(lam=lam)).cost - exact for lam in (1.0, 10.0, 100.0)]
            assert all(g >= -1e-9 for g in gaps)
            assert gaps[0] >= gaps[1] - 1e-9
            assert gaps[1] >= gaps[2] - 1e-9
            sharp = sinkhorn(c, a, b, SinkhornConfig(lam=1000.0)).cost - exact
            assert gaps[2] >= sharp - 1e-9
            assert -1e-6 <= sharp <= 1e-2


@pytest.mark.integration
@pytest.mark.slow
class TestDefaultDistillation:
    """Full default run with mismatched tokenizers"""

    def test_default_run(self):
        start = time.perf_counter()
        cfg = TrainConfig()
        monitor = TrainingMonitor(math.ceil(cfg.dataset_size / cfg.batch))
        log = train_run(cfg, monitor=monitor)
        elapsed = time.perf_counter() - start

        assert not log.aborted
        assert log.summary["steps"] == 2000
        assert log.summary["finite"]
        assert log.summary["kd_enabled"] is False
        assert log.summary["final_ot"] <= 0.7 * log.summary["initial_ot"]
        tail = monitor.epoch_averages("total")[-5:]
        assert all(later <= earlier for earlier, later in zip(tail, tail[1:]))
        assert elapsed < 300.0
        assert log.summary["final_ce"] < log.summary["initial_ce"]
        assert all(math.isfinite(r.total) for r in log.records)
        print(f"default run: {elapsed:.1f}s, ot {log.summary['initial_ot']:.4f} -> {log.summary['final_ot']:.4f}")


@pytest.mark.integration
@pytest.mark.slow
class TestAblationSweep:
    """Every preset runs and logs its own trace"""

    def test_presets_complete_with_distinct_traces(self):
        cfg = TrainConfig(steps=40, teacher_steps=100, dataset_size=16)
        names = ["only-cot", "cst", "crc", "hidden-only", "full"]
        logs = run_ablations(names, cfg, max_workers=2)

        assert set(logs) == set(names)
        for log in logs.values():
            assert not log.aborted
            assert log.summary["finite"]

        traces = {name: tuple(log.component("total")) for name, log in logs.items()}
        assert len(set(traces.values())) == len(names)
        assert logs["only-cot"].records[0].ccot is None
        assert logs["hidden-only"].records[0].emb_ot == 0.0
