"""Toy distillation harness: tokenizers, tiny models, synthetic data, training."""

from otalign.distill.data import Sample, Transform, make_copy_dataset, synth_cot_pair
from otalign.distill.model import ToyLM, ToyLMGrads, backward, forward, init_toy_lm
from otalign.distill.tokenizers import (
    ToyTokenizer,
    char_tokenize,
    pair_tokenize,
    train_pair_tokenizer,
)
from otalign.distill.trainer import (
    ABLATIONS,
    TrainConfig,
    pretrain_teacher,
    run_ablation,
    run_ablations,
    train_run,
)

__all__ = [
    "Sample",
    "Transform",
    "make_copy_dataset",
    "synth_cot_pair",
    "ToyLM",
    "ToyLMGrads",
    "backward",
    "forward",
    "init_toy_lm",
    "ToyTokenizer",
    "char_tokenize",
    "pair_tokenize",
    "train_pair_tokenizer",
    "ABLATIONS",
    "TrainConfig",
    "pretrain_teacher",
    "run_ablation",
    "run_ablations",
    "train_run",
]
