"""
Parallel evaluation support for independent alignment pairs.

Every OT pair inside a layer loss or a cross-CoT loss is an independent
Sinkhorn solve. They can be fanned out to a thread pool; results are always
returned in submission order so sums come out bit-identical to a serial run.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ParallelEvaluator:
    """
    Runs independent zero-argument tasks, optionally on a thread pool.

    With ``max_workers <= 1`` (the default) tasks run inline in order.
    """

    def __init__(self, max_workers: int = 1):
        """
        Initialize evaluator.

        Args:
            max_workers: Maximum number of concurrent workers (default: 1)
        """
        self.max_workers = max(1, int(max_workers))

    def run(self, tasks: Sequence[Callable[[], T]]) -> List[T]:
        """
        Execute tasks and return their results in the order given.

        Exceptions raised by a task propagate to the caller.
        """
        if self.max_workers == 1 or len(tasks) <= 1:
            return [task() for task in tasks]

        workers = min(self.max_workers, len(tasks))
        logger.debug("Evaluating %d tasks on %d workers", len(tasks), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(task) for task in tasks]
            return [future.result() for future in futures]


__all__ = ["ParallelEvaluator"]
