"""Attention-based neural machine translation with alignment-supervised
attention, implemented from scratch on a small reverse-mode tape."""

__version__ = "0.1.0"

from .data import Batch, SentencePair, Vocab, build_vocab, encode_pairs, filter_by_length, make_batches
from .decoding import Hypothesis, beam_search, extract_hard_alignment, force_decode, greedy_decode
from .estimator import AlignedTranslator
from .harness import ExperimentConfig, SynthSpec, generate, run_experiment
from .losses import LossConfig, delta_ce, delta_mse, delta_mul, joint_loss, nll
from .metrics import aer, bleu4
from .model import (
    ModelConfig,
    forward_teacher_forced,
    init_params,
    load_checkpoint,
    save_checkpoint,
    shape_manifest,
)
from .numerics import Tape, grad_check, matmul, sigmoid, softmax_row, tanh
from .supervision import HardAlignment, parse_pharaoh, to_supervision
from .training import OptimizerState, TrainConfig, adadelta_step, clip_gradients, train

__all__ = [
    "AlignedTranslator",
    "Batch",
    "ExperimentConfig",
    "HardAlignment",
    "Hypothesis",
    "LossConfig",
    "ModelConfig",
    "OptimizerState",
    "SentencePair",
    "SynthSpec",
    "Tape",
    "TrainConfig",
    "Vocab",
    "adadelta_step",
    "aer",
    "beam_search",
    "bleu4",
    "build_vocab",
    "clip_gradients",
    "delta_ce",
    "delta_mse",
    "delta_mul",
    "encode_pairs",
    "extract_hard_alignment",
    "filter_by_length",
    "force_decode",
    "forward_teacher_forced",
    "generate",
    "grad_check",
    "greedy_decode",
    "init_params",
    "joint_loss",
    "load_checkpoint",
    "make_batches",
    "matmul",
    "nll",
    "parse_pharaoh",
    "run_experiment",
    "save_checkpoint",
    "shape_manifest",
    "sigmoid",
    "softmax_row",
    "tanh",
    "to_supervision",
    "train",
]
