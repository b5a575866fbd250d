"""
Toy tokenizers with deliberately different vocabularies.

Both work over the same base alphabet: lowercase a-z, space, and the two
atomic markers ``<cot>`` and ``<sep>``. The ``char`` kind emits one id per
base symbol. The ``pair`` kind additionally applies an ordered list of
merges, BPE style, so the same text yields a shorter id sequence. That is
what makes student and teacher sequence lengths differ.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from otalign.exceptions import ConfigurationError, EncodingError, TokenIndexError

logger = logging.getLogger(__name__)

COT_MARKER = "<cot>"
SEP_MARKER = "<sep>"
MARKERS = (COT_MARKER, SEP_MARKER)
LETTERS = " abcdefghijklmnopqrstuvwxyz"
BASE_SYMBOLS: Tuple[str, ...] = tuple(LETTERS) + MARKERS

TOKENIZER_KINDS = ("char", "pair")


def split_symbols(text: str) -> List[str]:
    """
    Split text into base symbols, keeping markers atomic.

    Raises:
        EncodingError: On the first character outside the base alphabet
    """
    symbols: List[str] = []
    i = 0
    while i < len(text):
        for marker in MARKERS:
            if text.startswith(marker, i):
                symbols.append(marker)
                i += len(marker)
                break
        else:
            if text[i] not in LETTERS:
                raise EncodingError(text, i)
            symbols.append(text[i])
            i += 1
    return symbols


def _apply_merge(symbols: List[str], pair: Tuple[str, str]) -> List[str]:
    """Merge every left-to-right, non-overlapping occurrence of ``pair``."""
    merged: List[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            merged.append(pair[0] + pair[1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return merged


@dataclass
class ToyTokenizer:
    """
    Char- or pair-level tokenizer over the base alphabet.

    Attributes:
        kind: "char" or "pair"
        merges: Ordered merge list (pair kind only)
        vocab: Symbol to id map, ids dense in [0, size)
    """

    kind: str = "char"
    merges: List[Tuple[str, str]] = field(default_factory=list)
    vocab: Dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        if self.kind not in TOKENIZER_KINDS:
            raise ConfigurationError("tokenizer kind", f"must be one of {TOKENIZER_KINDS}, got {self.kind!r}")
        if self.kind == "char" and self.merges:
            raise ConfigurationError("merges", "a char tokenizer takes no merges")

        symbols = list(BASE_SYMBOLS)
        for left, right in self.merges:
            if left in MARKERS or right in MARKERS:
                raise ConfigurationError("merges", f"markers cannot be merged: {(left, right)}")
            merged = left + right
            if merged not in symbols:
                symbols.append(merged)
        self.merges = [tuple(m) for m in self.merges]
        self.vocab = {sym: i for i, sym in enumerate(symbols)}
        self._symbols = symbols

    @property
    def size(self) -> int:
        """Vocabulary size."""
        return len(self._symbols)

    def encode(self, text: str) -> List[int]:
        """Map text to ids; markers are single tokens."""
        symbols = split_symbols(text)
        if self.kind == "pair":
            for pair in self.merges:
                symbols = _apply_merge(symbols, pair)
        return [self.vocab[s] for s in symbols]

    def decode(self, ids: Iterable[int]) -> str:
        """Map ids back to text."""
        out = []
        for i in ids:
            if not 0 <= int(i) < self.size:
                raise TokenIndexError(int(i), self.size, f"{self.kind} vocabulary")
            out.append(self._symbols[int(i)])
        return "".join(out)

    def symbols(self, ids: Iterable[int]) -> List[str]:
        """Symbol strings for ids, one per id."""
        return [self._symbols[int(i)] for i in ids]

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "merges": [list(m) for m in self.merges]}

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "ToyTokenizer":
        merges = [tuple(m) for m in data.get("merges", [])]  # type: ignore[union-attr]
        return cls(kind=str(data.get("kind", "char")), merges=merges)  # type: ignore[arg-type]


def train_pair_tokenizer(corpus: Sequence[str], num_merges: int = 24) -> ToyTokenizer:
    """
    Learn a merge list from a corpus.

    Each round merges the most frequent adjacent symbol pair (ties broken by
    the pair itself, so the result depends only on the corpus). Markers are
    never merged. Stops early once no pair occurs at least twice.

    Args:
        corpus: Training texts over the base alphabet
        num_merges: Maximum number of merges to learn

    Returns:
        A pair tokenizer
    """
    if num_merges < 0:
        raise ConfigurationError("num_merges", f"must be >= 0, got {num_merges}")

    words = [split_symbols(text) for text in corpus]
    merges: List[Tuple[str, str]] = []
    for _ in range(num_merges):
        counts: Counter = Counter()
        for symbols in words:
            for left, right in zip(symbols, symbols[1:]):
                if left not in MARKERS and right not in MARKERS:
                    counts[(left, right)] += 1
        if not counts:
            break
        best, freq = min(counts.items(), key=lambda item: (-item[1], item[0]))
        if freq < 2:
            break
        merges.append(best)
        words = [_apply_merge(symbols, best) for symbols in words]

    logger.debug("Learned %d merges from %d texts", len(merges), len(corpus))
    return ToyTokenizer(kind="pair", merges=merges)


def make_tokenizer(kind: str, corpus: Optional[Sequence[str]] = None, num_merges: int = 24) -> ToyTokenizer:
    """Build a tokenizer of ``kind``; pair tokenizers are trained on ``corpus``."""
    if kind == "pair":
        if corpus is None:
            return default_pair_tokenizer()
        return train_pair_tokenizer(corpus, num_merges)
    return ToyTokenizer(kind=kind)


_default_pair: Optional[ToyTokenizer] = None


def default_pair_tokenizer() -> ToyTokenizer:
    """Pair tokenizer trained on the default copy-task corpus."""
    global _default_pair
    if _default_pair is None:
        from otalign.distill.data import dataset_corpus, make_copy_dataset

        _default_pair = train_pair_tokenizer(dataset_corpus(make_copy_dataset()))
    return _default_pair


def char_tokenize(text: str) -> List[int]:
    """One id per base symbol."""
    return ToyTokenizer(kind="char").encode(text)


def pair_tokenize(text: str) -> List[int]:
    """Ids under the default pair tokenizer."""
    return default_pair_tokenizer().encode(text)


__all__ = [
    "COT_MARKER",
    "SEP_MARKER",
    "BASE_SYMBOLS",
    "ToyTokenizer",
    "split_symbols",
    "train_pair_tokenizer",
    "make_tokenizer",
    "default_pair_tokenizer",
    "char_tokenize",
    "pair_tokenize",
]
