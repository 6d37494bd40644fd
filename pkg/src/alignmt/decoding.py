"""Greedy and beam-search translation, force-decoding, and extraction of
hard alignments from attention matrices.

Beam search keeps the ``beam`` best partial translations by accumulated
log-probability; a hypothesis that emits the end-of-sentence token moves
to a completed pool.  Scores are never length-normalized by default.
Ties break toward the shorter hypothesis, then lexicographic token order,
so decoding is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EOL, SentencePair
from .errors import DomainError
from .model import (
    BoundModel,
    ModelConfig,
    bind,
    decoder_step,
    encode,
    forward_teacher_forced,
    initial_state,
)
from .numerics import Tape
from .supervision import HardAlignment


@dataclass(frozen=True)
class Hypothesis:
    """A partial translation: generated tokens (eol excluded), accumulated
    log-probability, decoder state, and the attention row of every step."""

    tokens: tuple[int, ...]
    log_prob: float
    state: np.ndarray | None
    alpha_rows: tuple[np.ndarray, ...]
    finished: bool = False

    def alpha_matrix(self) -> np.ndarray:
        return np.vstack(self.alpha_rows)

    def sort_key(self):
        # higher score first, then shorter, then lexicographically smaller
        return (-self.log_prob, len(self.tokens), self.tokens)


def default_max_len(source_len: int) -> int:
    """Decode-length cap: twice the pre-eol source length plus ten."""
    return 2 * source_len + 10


def _bound_inference(config: ModelConfig, params: dict[str, np.ndarray]) -> BoundModel:
    return bind(config, params, Tape(recording=False))


def greedy_decode(
    x,
    config: ModelConfig,
    params: dict[str, np.ndarray],
    max_len: int | None = None,
) -> tuple[list[int], np.ndarray]:
    """Argmax decoding; returns generated tokens (eol stripped) and the
    stacked attention rows of every step taken, the eol step included."""
    if max_len is None:
        max_len = default_max_len(len(x) - 1)
    if max_len < 1:
        raise DomainError(f"max_len must be at least 1, got {max_len}")
    model = _bound_inference(config, params)
    enc = encode(x, model)
    h = initial_state(enc, model)
    y_prev = EOL
    tokens: list[int] = []
    rows: list[np.ndarray] = []
    for _ in range(max_len):
        state, probs = decoder_step(y_prev, h, enc, model)
        rows.append(state.alpha.value.copy())
        choice = int(np.argmax(probs.value[0]))
        if choice == EOL:
            break
        tokens.append(choice)
        h = state.h
        y_prev = choice
    return tokens, np.vstack(rows)


def beam_search(
    x,
    config: ModelConfig,
    params: dict[str, np.ndarray],
    beam: int,
    max_len: int | None = None,
) -> Hypothesis:
    """Best completed hypothesis under standard beam search.

    Every live hypothesis expands over the full vocabulary each step; the
    ``beam`` best candidates survive, finished ones moving to a completed
    pool.  Hypotheses still alive at ``max_len`` complete as they stand.
    """
    if beam < 1:
        raise DomainError(f"beam must be at least 1, got {beam}")
    if max_len is None:
        max_len = default_max_len(len(x) - 1)
    model = _bound_inference(config, params)
    enc = encode(x, model)
    h0 = initial_state(enc, model)

    live = [Hypothesis(tokens=(), log_prob=0.0, state=h0.value, alpha_rows=())]
    completed: list[Hypothesis] = []

    for _ in range(max_len):
        if not live:
            break
        candidates: list[Hypothesis] = []
        for hyp in live:
            y_prev = hyp.tokens[-1] if hyp.tokens else EOL
            state, probs = decoder_step(
                y_prev, model.tape.leaf(hyp.state), enc, model
            )
            log_probs = np.log(np.maximum(probs.value[0], 1e-300))
            alpha_rows = hyp.alpha_rows + (state.alpha.value.copy(),)
            for w in range(log_probs.shape[0]):
                candidates.append(
                    Hypothesis(
                        tokens=hyp.tokens + (w,),
                        log_prob=hyp.log_prob + float(log_probs[w]),
                        state=state.h.value,
                        alpha_rows=alpha_rows,
                    )
                )
        candidates.sort(key=Hypothesis.sort_key)
        live = []
        for cand in candidates[:beam]:
            if cand.tokens[-1] == EOL:
                completed.append(
                    Hypothesis(
                        tokens=cand.tokens[:-1],
                        log_prob=cand.log_prob,
                        state=None,
                        alpha_rows=cand.alpha_rows,
                        finished=True,
                    )
                )
            else:
                live.append(cand)

    completed.extend(
        Hypothesis(
            tokens=hyp.tokens,
            log_prob=hyp.log_prob,
            state=None,
            alpha_rows=hyp.alpha_rows,
            finished=False,
        )
        for hyp in live
    )
    return min(completed, key=Hypothesis.sort_key)


def force_decode(
    pair: SentencePair,
    config: ModelConfig,
    params: dict[str, np.ndarray],
) -> np.ndarray:
    """Teacher-forced pass over a given pair, returning the predicted
    attention matrix (identical to the training-time forward's)."""
    model = _bound_inference(config, params)
    return forward_teacher_forced(pair, model).alpha_matrix()


def extract_hard_alignment(alpha: np.ndarray) -> HardAlignment:
    """One link per target word to its highest-attention source word.

    The eol row is excluded; rows whose argmax is the source eol column
    yield no link; argmax ties resolve to the lowest source index.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    n = alpha.shape[0] - 1
    m = alpha.shape[1] - 1
    links = set()
    for t in range(n):
        i = int(np.argmax(alpha[t]))
        if i != m:
            links.add((i, t))
    return HardAlignment(frozenset(links), m=m, n=n)


def format_pharaoh(hard: HardAlignment) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(hard.links))
