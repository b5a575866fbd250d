"""
A tiny causal language model with a hand-derived backward pass.

For ids ``i_0..i_{T-1}``:

    e_t      = embed[i_t]
    pooled_t = mean(e_0..e_t)
    h_t      = tanh(pooled_t @ w1 + b1)
    z_t      = h_t @ w2 + b2

Causal mean-pooling stands in for attention: row t depends only on ids
up to t, and every gradient is a few matrix products.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from otalign.core.numerics import Matrix, Vector
from otalign.exceptions import ConfigurationError, DimensionError, TokenIndexError

logger = logging.getLogger(__name__)

PARAM_NAMES = ("embed", "w1", "b1", "w2", "b2")


@dataclass
class ToyLM:
    """Parameters of the toy model: embed (V x d), w1 (d x h), b1 (h), w2 (h x V), b2 (V)."""

    embed: Matrix
    w1: Matrix
    b1: Vector
    w2: Matrix
    b2: Vector

    def __post_init__(self) -> None:
        v, d = self.embed.shape
        h = self.w1.shape[1]
        expected = {"embed": (v, d), "w1": (d, h), "b1": (h,), "w2": (h, v), "b2": (v,)}
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionError(f"ToyLM.{name}", shape, got)

    @property
    def vocab_size(self) -> int:
        return int(self.embed.shape[0])

    @property
    def embed_dim(self) -> int:
        return int(self.embed.shape[1])

    @property
    def hidden_dim(self) -> int:
        return int(self.w1.shape[1])

    def params(self) -> Iterator[Tuple[str, np.ndarray]]:
        """(name, array) pairs in a fixed order; arrays are live references."""
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "ToyLM":
        return ToyLM(**{name: arr.copy() for name, arr in self.params()})

    def to_dict(self) -> Dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.params()}

    @classmethod
    def from_dict(cls, data: Dict[str, ArrayLike]) -> "ToyLM":
        return cls(**{name: np.array(data[name], dtype=np.float64) for name in PARAM_NAMES})


@dataclass
class ToyLMGrads:
    """Gradients for each ToyLM parameter block, same shapes."""

    embed: Matrix
    w1: Matrix
    b1: Vector
    w2: Matrix
    b2: Vector

    @classmethod
    def zeros_like(cls, model: ToyLM) -> "ToyLMGrads":
        return cls(**{name: np.zeros_like(arr) for name, arr in model.params()})

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def add_(self, other: "ToyLMGrads", scale: float = 1.0) -> "ToyLMGrads":
        """In-place ``self += scale * other``."""
        for name, arr in self.items():
            arr += scale * getattr(other, name)
        return self

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(arr * arr) for _, arr in self.items())))


def init_toy_lm(vocab_size: int, embed_dim: int, hidden_dim: int, seed: int, scale: float = 0.5) -> ToyLM:
    """
    Random model from a seed; biases start at zero.

    Weights are normal with std ``scale`` for the embedding and
    ``scale / sqrt(fan_in)`` for the two dense layers.
    """
    if min(vocab_size, embed_dim, hidden_dim) < 1:
        raise ConfigurationError("model dims", f"must be >= 1, got {(vocab_size, embed_dim, hidden_dim)}")
    rng = np.random.default_rng(seed)
    return ToyLM(
        embed=rng.normal(0.0, scale, size=(vocab_size, embed_dim)),
        w1=rng.normal(0.0, scale / np.sqrt(embed_dim), size=(embed_dim, hidden_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.normal(0.0, scale / np.sqrt(hidden_dim), size=(hidden_dim, vocab_size)),
        b2=np.zeros(vocab_size),
    )


def _check_ids(model: ToyLM, ids: Sequence[int]) -> np.ndarray:
    idx = np.asarray(ids)
    if idx.ndim != 1 or idx.size == 0:
        raise DimensionError("ids", "non-empty 1-D id sequence", idx.shape)
    bad = np.flatnonzero((idx < 0) | (idx >= model.vocab_size))
    if bad.size:
        raise TokenIndexError(int(idx[bad[0]]), model.vocab_size, "model vocabulary")
    return idx.astype(np.intp)


def _pool(emb: Matrix) -> Matrix:
    counts = np.arange(1, emb.shape[0] + 1, dtype=np.float64)[:, None]
    return np.cumsum(emb, axis=0) / counts


def forward(model: ToyLM, ids: Sequence[int]) -> Tuple[Matrix, Matrix, Matrix]:
    """
    Run the model on an id sequence.

    Returns:
        (embeddings T x d, hiddens T x h, logits T x V)
    """
    idx = _check_ids(model, ids)
    emb = model.embed[idx]
    hid = np.tanh(_pool(emb) @ model.w1 + model.b1)
    logits = hid @ model.w2 + model.b2
    return emb, hid, logits


def backward(
    model: ToyLM,
    ids: Sequence[int],
    g_emb: Optional[ArrayLike] = None,
    g_hid: Optional[ArrayLike] = None,
    g_logits: Optional[ArrayLike] = None,
) -> ToyLMGrads:
    """
    Parameter gradients of a scalar loss given its upstream gradients.

    Args:
        model: The model
        ids: Input ids used in the forward pass
        g_emb: dLoss/d embeddings (T x d); None means zero
        g_hid: dLoss/d hiddens (T x h); None means zero
        g_logits: dLoss/d logits (T x V); None means zero

    Returns:
        ToyLMGrads for all five parameter blocks
    """
    idx = _check_ids(model, ids)
    t = idx.size
    emb = model.embed[idx]
    pooled = _pool(emb)
    hid = np.tanh(pooled @ model.w1 + model.b1)

    def upstream(g: Optional[ArrayLike], width: int, name: str) -> Matrix:
        if g is None:
            return np.zeros((t, width))
        arr = np.asarray(g, dtype=np.float64)
        if arr.shape != (t, width):
            raise DimensionError(f"upstream gradient {name}", (t, width), arr.shape)
        return arr

    g_e = upstream(g_emb, model.embed_dim, "embeddings")
    g_h = upstream(g_hid, model.hidden_dim, "hiddens")
    g_z = upstream(g_logits, model.vocab_size, "logits")

    grads = ToyLMGrads.zeros_like(model)
    grads.b2 = g_z.sum(axis=0)
    grads.w2 = hid.T @ g_z
    g_h = g_h + g_z @ model.w2.T
    g_pre = g_h * (1.0 - hid * hid)
    grads.w1 = pooled.T @ g_pre
    grads.b1 = g_pre.sum(axis=0)
    g_pooled = g_pre @ model.w1.T

    # pooled_t averages rows 0..t, so row k receives sum_{t>=k} g_pooled_t / (t+1)
    scaled = g_pooled / np.arange(1, t + 1, dtype=np.float64)[:, None]
    g_rows = g_e + np.cumsum(scaled[::-1], axis=0)[::-1]
    np.add.at(grads.embed, idx, g_rows)
    return grads


def apply_gradients(model: ToyLM, grads: ToyLMGrads, lr: float) -> None:
    """Plain gradient-descent step, in place."""
    for name, arr in model.params():
        arr -= lr * getattr(grads, name)


__all__ = [
    "ToyLM",
    "ToyLMGrads",
    "init_toy_lm",
    "forward",
    "backward",
    "apply_gradients",
]
