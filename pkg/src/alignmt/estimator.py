"""Scikit-learn style facade over the library.

``AlignedTranslator`` is a BaseEstimator: construct with hyper-parameters,
``fit`` on lists of pre-tokenized source/target lines (optionally with
Pharaoh alignment lines to supervise the attention), ``predict`` to
translate, ``score`` for corpus BLEU.  It participates in ``clone`` and
``get_params``/``set_params`` like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import build_vocab, encode_pairs, filter_by_length
from .decoding import beam_search, extract_hard_alignment, force_decode, format_pharaoh
from .errors import ConsistencyError
from .losses import LossConfig
from .metrics import bleu4
from .model import ModelConfig
from .supervision import load_alignments
from .training import TrainConfig, train


def _check_lines(lines, name: str) -> list[str]:
    if isinstance(lines, str):
        raise ValueError(f"{name} must be a sequence of lines, not a single string")
    lines = list(lines)
    for i, line in enumerate(lines):
        if not isinstance(line, str):
            raise ValueError(f"{name}[{i}] is {type(line).__name__}, expected str")
    return lines


class AlignedTranslator(BaseEstimator):
    """Attention-based translator whose attention can be supervised by
    word alignments during fitting.

    Parameters mirror the training CLI: ``delta`` picks the disagreement
    loss ("none" trains a plain attention model), ``lam`` its weight.
    """

    def __init__(
        self,
        embed_dim: int = 32,
        hidden_dim: int = 64,
        attn_dim: int | None = None,
        delta: str = "ce",
        lam: float = 0.3,
        batch_size: int = 8,
        max_updates: int = 1000,
        eval_every: int = 100,
        beam: int = 4,
        vocab_cap: int = 30000,
        max_len: int = 50,
        clip_norm: float | None = 1.0,
        seed: int = 0,
    ):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.attn_dim = attn_dim
        self.delta = delta
        self.lam = lam
        self.batch_size = batch_size
        self.max_updates = max_updates
        self.eval_every = eval_every
        self.beam = beam
        self.vocab_cap = vocab_cap
        self.max_len = max_len
        self.clip_norm = clip_norm
        self.seed = seed

    def fit(self, X, y, alignments=None, X_dev=None, y_dev=None):
        """Train on parallel lines X (source) and y (target).

        ``alignments`` are Pharaoh lines, one per pair, required unless
        ``delta="none"``.  When a development set is given, the best
        parameters by greedy dev BLEU are kept; otherwise the final ones.
        """
        X = _check_lines(X, "X")
        y = _check_lines(y, "y")
        if len(X) != len(y):
            raise ConsistencyError(f"X has {len(X)} lines, y has {len(y)}")
        loss = LossConfig(kind=self.delta, weight=self.lam)
        if alignments is not None:
            alignments = _check_lines(alignments, "alignments")
            if len(alignments) != len(X):
                raise ConsistencyError(
                    f"alignments has {len(alignments)} lines, X has {len(X)}"
                )

        keep = [
            i
            for i in range(len(X))
            if len(X[i].split()) <= self.max_len and len(y[i].split()) <= self.max_len
        ]
        X = [X[i] for i in keep]
        y = [y[i] for i in keep]
        if alignments is not None:
            alignments = [alignments[i] for i in keep]

        self.src_vocab_ = build_vocab(X, self.vocab_cap)
        self.tgt_vocab_ = build_vocab(y, self.vocab_cap)
        pairs = encode_pairs(X, y, self.src_vocab_, self.tgt_vocab_)
        supervision = (
            load_alignments(alignments, pairs) if alignments is not None else None
        )

        dev_pairs = None
        if X_dev is not None and y_dev is not None:
            dev_pairs = encode_pairs(
                _check_lines(X_dev, "X_dev"),
                _check_lines(y_dev, "y_dev"),
                self.src_vocab_,
                self.tgt_vocab_,
            )

        self.model_config_ = ModelConfig(
            src_vocab=self.src_vocab_.size,
            tgt_vocab=self.tgt_vocab_.size,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            attn_dim=self.attn_dim,
        )
        result = train(
            pairs,
            supervision if loss.supervised else None,
            self.model_config_,
            TrainConfig(
                loss=loss,
                batch_size=self.batch_size,
                max_updates=self.max_updates,
                eval_every=self.eval_every if dev_pairs else 0,
                seed=self.seed,
                clip_norm=self.clip_norm,
            ),
            dev_pairs=dev_pairs,
            tgt_vocab=self.tgt_vocab_,
        )
        self.params_ = result.best_params
        self.curve_ = result.curve
        return self

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("this AlignedTranslator is not fitted; call fit first")

    def predict(self, X) -> list[str]:
        """Beam-search translations of source lines."""
        self._require_fitted()
        X = _check_lines(X, "X")
        out = []
        for line in X:
            hyp = beam_search(
                self.src_vocab_.encode(line), self.model_config_, self.params_, beam=self.beam
            )
            out.append(self.tgt_vocab_.decode(hyp.tokens))
        return out

    def score(self, X, y) -> float:
        """Corpus BLEU4 of the model's translations against references y."""
        return bleu4(self.predict(X), _check_lines(y, "y"))

    def align(self, X, y) -> list[str]:
        """Pharaoh hard alignments from force-decoding given pairs."""
        self._require_fitted()
        pairs = encode_pairs(
            _check_lines(X, "X"), _check_lines(y, "y"), self.src_vocab_, self.tgt_vocab_
        )
        return [
            format_pharaoh(
                extract_hard_alignment(
                    force_decode(pair, self.model_config_, self.params_)
                )
            )
            for pair in pairs
        ]

    def attention_matrix(self, x_line: str, y_line: str) -> np.ndarray:
        """Predicted attention matrix for one pair (rows: target then eol)."""
        self._require_fitted()
        pairs = encode_pairs([x_line], [y_line], self.src_vocab_, self.tgt_vocab_)
        return force_decode(pairs[0], self.model_config_, self.params_)
