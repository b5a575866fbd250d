"""Ablation sweep for the toy cross-tokenizer distillation harness."""

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from otalign import __version__
from otalign.distill.trainer import ABLATIONS, TrainConfig, run_ablations
from otalign.io.formats import canonical_json


@dataclass
class AblationResult:
    """Outcome of one preset."""

    name: str
    steps: int
    aborted: bool
    initial_total: Optional[float]
    final_total: Optional[float]
    initial_ot: Optional[float]
    final_ot: Optional[float]
    final_ce: Optional[float]
    epoch_total: List[Optional[float]] = field(default_factory=list)

    @property
    def ot_ratio(self) -> Optional[float]:
        if not self.initial_ot or self.final_ot is None:
            return None
        return self.final_ot / self.initial_ot


@dataclass
class AblationSuite:
    """All presets of one sweep."""

    timestamp: str
    version: str
    wall_time: float
    config: Dict[str, Any]
    results: List[AblationResult]


class AblationRunner:
    """Run ablation presets against one shared teacher and report them."""

    def __init__(self, cfg: TrainConfig, max_workers: int = 1):
        self.cfg = cfg
        self.max_workers = max_workers

    def run(self, names: List[str]) -> AblationSuite:
        print(f"Running {len(names)} presets x {self.cfg.steps} steps...")
        start = time.perf_counter()
        logs = run_ablations(names, self.cfg, max_workers=self.max_workers)
        wall = time.perf_counter() - start

        results = []
        for name, log in logs.items():
            s = log.summary
            window = max(1, -(-self.cfg.dataset_size // self.cfg.batch))
            totals = [r.total for r in log.records]
            epoch_total = [
                sum(totals[k:k + window]) / len(totals[k:k + window]) for k in range(0, len(totals), window)
            ]
            results.append(
                AblationResult(
                    name=name,
                    steps=s.get("steps", 0),
                    aborted=log.aborted,
                    initial_total=s.get("initial_total"),
                    final_total=s.get("final_total"),
                    initial_ot=s.get("initial_ot"),
                    final_ot=s.get("final_ot"),
                    final_ce=s.get("final_ce"),
                    epoch_total=epoch_total,
                )
            )

        return AblationSuite(
            timestamp=datetime.now().isoformat(),
            version=__version__,
            wall_time=wall,
            config=self.cfg.to_dict(),
            results=results,
        )

    def generate_report(self, suite: AblationSuite, output_file: Optional[Path] = None) -> str:
        """Plain-text table of the sweep."""

        def fmt(x: Optional[float]) -> str:
            return f"{x:>10.4f}" if x is not None else f"{'-':>10}"

        lines = ["=" * 80, "otalign Ablation Report", "=" * 80]
        lines.append(f"Timestamp: {suite.timestamp}")
        lines.append(f"Version: {suite.version}")
        lines.append(f"Wall time: {suite.wall_time:.1f}s")
        lines.append("")
        lines.append(f"{'Preset':<14} {'final ce':>10} {'total 0':>10} {'total T':>10} {'ot 0':>10} {'ot T':>10} {'ot T/0':>10}")
        lines.append("-" * 80)
        for r in suite.results:
            flag = "  (aborted)" if r.aborted else ""
            lines.append(
                f"{r.name:<14} {fmt(r.final_ce)} {fmt(r.initial_total)} {fmt(r.final_total)} "
                f"{fmt(r.initial_ot)} {fmt(r.final_ot)} {fmt(r.ot_ratio)}{flag}"
            )
        lines.append("=" * 80)
        report = "\n".join(lines)

        if output_file:
            output_file.parent.mkdir(parents=True, exist_ok=True)
            output_file.write_text(report + "\n")
            print(f"Report saved to {output_file}")
        return report


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the otalign ablation sweep")
    parser.add_argument("--presets", nargs="+", default=sorted(ABLATIONS), choices=sorted(ABLATIONS))
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--output", default="benchmarks/results")
    args = parser.parse_args()

    runner = AblationRunner(TrainConfig(steps=args.steps, seed=args.seed), max_workers=args.workers)
    suite = runner.run(args.presets)

    out_dir = Path(args.output)
    print(runner.generate_report(suite, out_dir / "ablations.txt"))
    data = asdict(suite)
    for entry, result in zip(data["results"], suite.results):
        entry["ot_ratio"] = result.ot_ratio
    (out_dir / "ablations.json").write_text(canonical_json(data) + "\n")
    print(f"Results saved to {out_dir / 'ablations.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
