"""
Synthetic copy/transform task and chain-of-thought augmentation.

Each sample maps a short lowercase word ``x`` to a deterministic
transformation ``y`` of it. The CoT variant appends a prompt marker to the
input and prefixes the answer with an explicit, longer rationale followed
by the ``<sep>`` marker and the final answer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np

from otalign.distill.tokenizers import COT_MARKER, SEP_MARKER, split_symbols
from otalign.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

TASK_LETTERS = "abcdefgh"


class Transform(Enum):
    """Transformations the copy task can ask for."""
    COPY = "copy"
    REVERSE = "reverse"

    def apply(self, text: str) -> str:
        if self is Transform.REVERSE:
            return text[::-1]
        return text


@dataclass(frozen=True)
class Sample:
    """One training example with its CoT-augmented variant."""

    x: str
    y: str
    x_cot: str
    y_cot: str

    def to_dict(self) -> Dict[str, str]:
        return {"x": self.x, "y": self.y, "x_cot": self.x_cot, "y_cot": self.y_cot}


def synth_cot_pair(x_raw: str, y_raw: str, seed: int = 0) -> Tuple[str, str]:
    """
    Build the CoT variant of a pair.

    ``x_cot`` is ``x_raw + "<sep><cot>"``. ``y_cot`` spells every symbol of
    ``y_raw`` twice as the rationale, then ``"<sep>"`` and ``y_raw``. The
    expansion is deterministic; ``seed`` is accepted for interface symmetry
    with the dataset generator and does not change the result.
    """
    symbols = split_symbols(y_raw)
    split_symbols(x_raw)
    rationale = "".join(s + s for s in symbols)
    return x_raw + SEP_MARKER + COT_MARKER, rationale + SEP_MARKER + y_raw


def make_copy_dataset(
    size: int = 64,
    seed: int = 0,
    transform: str = "copy",
    min_len: int = 2,
    max_len: int = 5,
) -> List[Sample]:
    """
    Generate the synthetic task from a seed.

    Args:
        size: Number of samples (1..2000)
        seed: RNG seed
        transform: "copy" or "reverse"
        min_len: Shortest word
        max_len: Longest word

    Returns:
        List of samples, identical for identical arguments
    """
    if not 1 <= size <= 2000:
        raise ConfigurationError("dataset_size", f"must lie in [1, 2000], got {size}")
    if not 1 <= min_len <= max_len:
        raise ConfigurationError("word length", f"need 1 <= min_len <= max_len, got {(min_len, max_len)}")
    try:
        op = Transform(transform)
    except ValueError as exc:
        raise ConfigurationError("transform", f"must be one of {[t.value for t in Transform]}") from exc

    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(size):
        length = int(rng.integers(min_len, max_len + 1))
        x = "".join(TASK_LETTERS[int(k)] for k in rng.integers(0, len(TASK_LETTERS), size=length))
        y = op.apply(x)
        x_cot, y_cot = synth_cot_pair(x, y, seed)
        samples.append(Sample(x=x, y=y, x_cot=x_cot, y_cot=y_cot))

    logger.debug("Generated %d %s samples (seed=%d)", size, op.value, seed)
    return samples


def dataset_corpus(samples: Sequence[Sample]) -> List[str]:
    """Every text in the dataset, for tokenizer training."""
    corpus: List[str] = []
    for s in samples:
        corpus.extend([s.x, s.y, s.x_cot, s.y_cot])
    return corpus


__all__ = [
    "Transform",
    "Sample",
    "synth_cot_pair",
    "make_copy_dataset",
    "dataset_corpus",
]
