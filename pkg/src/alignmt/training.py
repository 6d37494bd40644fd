"""Optimization loop: Adadelta (default) or plain SGD, periodic greedy
evaluation on a development set, checkpoint retention, learning-curve rows.

Each pair in a batch runs forward/backward on its own tape; gradients are
summed left to right in manifest order, clipped by global L2 norm, then
applied.  Training is a pure function of (seed, configs, corpus): identical
inputs reproduce identical logs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import SentencePair, Vocab, make_batches
from .errors import ConfigurationError, ConsistencyError, DomainError, NumericError
from .losses import LossConfig, joint_loss
from .model import ModelConfig, bind, init_params, shape_manifest
from .numerics import Tape

ADADELTA_RHO = 0.95
ADADELTA_EPS = 1e-6


@dataclass
class OptimizerState:
    """Adadelta accumulators: EMAs of squared gradients and squared updates."""

    sq_grad: dict[str, np.ndarray]
    sq_update: dict[str, np.ndarray]
    rho: float = ADADELTA_RHO
    eps: float = ADADELTA_EPS

    @classmethod
    def fresh(cls, params: dict[str, np.ndarray]) -> "OptimizerState":
        return cls(
            sq_grad={k: np.zeros_like(v) for k, v in params.items()},
            sq_update={k: np.zeros_like(v) for k, v in params.items()},
        )


def adadelta_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
) -> None:
    """One in-place Adadelta update (no learning rate by construction)."""
    for name in params:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in tensor {name}")
        eg = state.sq_grad[name]
        eu = state.sq_update[name]
        eg *= state.rho
        eg += (1.0 - state.rho) * g * g
        update = -np.sqrt(eu + state.eps) / np.sqrt(eg + state.eps) * g
        params[name] += update
        eu *= state.rho
        eu += (1.0 - state.rho) * update * update


def sgd_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    learning_rate: float,
) -> None:
    for name in params:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in tensor {name}")
        params[name] -= learning_rate * g


def clip_gradients(grads: dict[str, np.ndarray], threshold: float) -> dict[str, np.ndarray]:
    """Scale all gradients so the global L2 norm is at most ``threshold``."""
    if threshold <= 0:
        raise DomainError(f"clip threshold must be positive, got {threshold}")
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = math.sqrt(total)
    if norm > threshold:
        scale = threshold / norm
        for g in grads.values():
            g *= scale
    return grads


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    batch_size: int = 80
    max_updates: int = 1000
    eval_every: int = 100
    seed: int = 0
    clip_norm: float | None = 1.0
    optimizer: str = "adadelta"
    sgd_learning_rate: float = 0.1

    def __post_init__(self):
        if self.max_updates < 1:
            raise DomainError("max_updates must be at least 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise DomainError("clip threshold must be positive (or None to disable)")
        if self.optimizer not in ("adadelta", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class CurveRow:
    update: int
    train_loss: float
    dev_bleu: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    best_params: dict[str, np.ndarray]
    best_update: int
    best_bleu: float
    opt_state: OptimizerState
    curve: list[CurveRow]


def write_curve(path, rows: list[CurveRow]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("update,train_loss,dev_bleu\n")
        for r in rows:
            f.write(f"{r.update},{r.train_loss!r},{r.dev_bleu!r}\n")


def train(
    pairs: list[SentencePair],
    supervision: list[np.ndarray] | None,
    model_config: ModelConfig,
    config: TrainConfig,
    dev_pairs: list[SentencePair] | None = None,
    tgt_vocab: Vocab | None = None,
    params: dict[str, np.ndarray] | None = None,
    opt_state: OptimizerState | None = None,
    log=None,
) -> TrainResult:
    """Optimize the joint objective over the corpus.

    With ``dev_pairs`` and ``tgt_vocab`` given, every ``eval_every`` updates
    the model greedily translates the development set, records corpus BLEU,
    and keeps the best-scoring parameter snapshot.  Without a development
    set the last parameters double as the best ones.  ``params`` and
    ``opt_state`` resume an earlier run.
    """
    from .decoding import greedy_decode  # cycle: decoding imports model only
    from .metrics import bleu4

    if config.loss.supervised and supervision is None:
        raise ConfigurationError(
            f"delta kind {config.loss.kind!r} requires supervision matrices"
        )
    if supervision is not None and len(supervision) != len(pairs):
        raise ConsistencyError(
            f"supervision count {len(supervision)} != pair count {len(pairs)}"
        )
    if dev_pairs is not None and tgt_vocab is None:
        raise ConfigurationError("dev evaluation needs the target vocabulary")

    if params is None:
        params = init_params(model_config, config.seed)
    if opt_state is None:
        opt_state = OptimizerState.fresh(params)
    names = list(shape_manifest(model_config))

    def dev_bleu() -> float:
        if not dev_pairs:
            return 0.0
        candidates = []
        references = []
        for pair in dev_pairs:
            tokens, _ = greedy_decode(pair.source, model_config, params)
            candidates.append(tgt_vocab.decode(tokens))
            references.append(tgt_vocab.decode(pair.target))
        return bleu4(candidates, references)

    curve: list[CurveRow] = []
    best_params = {k: v.copy() for k, v in params.items()}
    best_bleu = -1.0
    best_update = 0
    update = 0
    epoch = 0

    while update < config.max_updates:
        batches = make_batches(pairs, supervision, config.batch_size, config.seed + epoch)
        epoch += 1
        for batch in batches:
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            batch_loss = 0.0
            sup = batch.supervision or [None] * len(batch.pairs)
            for pair, alpha_hat in zip(batch.pairs, sup):
                tape = Tape()
                bound = bind(model_config, params, tape)
                loss = joint_loss(pair, alpha_hat, bound, config.loss)
                tape.backward(loss.total)
                batch_loss += float(loss.total.value[0, 0])
                for name in names:
                    g = bound.p[name].grad
                    if g is not None:
                        grads[name] += g
            if config.clip_norm is not None:
                clip_gradients(grads, config.clip_norm)
            if config.optimizer == "adadelta":
                adadelta_step(params, grads, opt_state)
            else:
                sgd_step(params, grads, config.sgd_learning_rate)
            update += 1

            if config.eval_every > 0 and update % config.eval_every == 0:
                score = dev_bleu()
                curve.append(CurveRow(update, batch_loss, score))
                if log is not None:
                    log(f"update {update} loss {batch_loss:.4f} dev_bleu {score:.4f}")
                if score > best_bleu:
                    best_bleu = score
                    best_update = update
                    best_params = {k: v.copy() for k, v in params.items()}
            if update >= config.max_updates:
                break

    if best_bleu < 0:
        best_params = {k: v.copy() for k, v in params.items()}
        best_bleu = 0.0
        best_update = update
    return TrainResult(
        params=params,
        best_params=best_params,
        best_update=best_update,
        best_bleu=best_bleu,
        opt_state=opt_state,
        curve=curve,
    )


# ---------------------------------------------------------------------------
# Optimizer-state persistence (for resumable training)
# ---------------------------------------------------------------------------

def save_opt_state(path, state: OptimizerState) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"alignmt-optstate 1 {state.rho!r} {state.eps!r}\n")
        for group, tensors in (("sq_grad", state.sq_grad), ("sq_update", state.sq_update)):
            for name in sorted(tensors):
                t = tensors[name]
                f.write(f"tensor {group} {name} {t.shape[0]} {t.shape[1]}\n")
                for row in t:
                    f.write(" ".join(repr(v) for v in row) + "\n")
        f.write("end\n")


def load_opt_state(path) -> OptimizerState:
    from .errors import ParseError

    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    head = lines[0].split()
    if len(head) != 4 or head[0] != "alignmt-optstate" or head[1] != "1":
        raise ParseError(f"not an optimizer-state file: {path}")
    state = OptimizerState(sq_grad={}, sq_update={}, rho=float(head[2]), eps=float(head[3]))
    i = 1
    while i < len(lines) and lines[i] != "end":
        parts = lines[i].split()
        if len(parts) != 5 or parts[0] != "tensor":
            raise ParseError(f"bad optimizer-state tensor header: {lines[i]!r}")
        _, group, name, rows, cols = parts
        rows, cols = int(rows), int(cols)
        block = np.array(
            [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
        ).reshape(rows, cols)
        getattr(state, group)[name] = block
        i += 1 + rows
    return state
