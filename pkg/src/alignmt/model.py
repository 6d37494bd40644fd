"""Encoder-decoder forward computation with attention.

The encoder is a pair of GRUs run left-to-right and right-to-left over the
source (including its eol); position i of the encoding matrix is the
concatenation of the two direction states.  Each decoder step scores every
source position with a one-hidden-layer MLP over (previous decoder state,
source encoding, previous target word embedding), normalizes the scores
into an attention row, forms the context vector as the attention-weighted
sum of source encodings, advances a GRU on [previous embedding; context],
and produces the next-word distribution through a single affine map over
[previous embedding; state; context].

All state vectors are 1 x d rows; weights multiply on the right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import EOL, SentencePair, Vocab
from .errors import CheckpointError, DomainError
from .numerics import Node, Tape, concat_cols, concat_rows

CHECKPOINT_MAGIC = "alignmt-checkpoint"
CHECKPOINT_VERSION = 1

GATES = ("z", "r", "h")


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions of every trainable tensor."""

    src_vocab: int
    tgt_vocab: int
    embed_dim: int = 620
    hidden_dim: int = 1000
    attn_dim: int | None = None

    def __post_init__(self):
        for name in ("src_vocab", "tgt_vocab", "embed_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be at least 1")
        if self.attn_dim is not None and self.attn_dim < 1:
            raise DomainError("attn_dim must be at least 1")

    @property
    def attention_dim(self) -> int:
        return self.attn_dim if self.attn_dim is not None else self.hidden_dim


def shape_manifest(config: ModelConfig) -> dict[str, tuple[int, int]]:
    """Name -> (rows, cols) for every parameter tensor, in a fixed order."""
    e, h, a = config.embed_dim, config.hidden_dim, config.attention_dim
    ctx = 2 * h
    manifest: dict[str, tuple[int, int]] = {
        "src_emb": (config.src_vocab, e),
        "tgt_emb": (config.tgt_vocab, e),
    }
    for d in ("fwd", "bwd"):
        for g in GATES:
            manifest[f"enc_{d}_W{g}"] = (e, h)
            manifest[f"enc_{d}_U{g}"] = (h, h)
            manifest[f"enc_{d}_b{g}"] = (1, h)
    for g in GATES:
        manifest[f"dec_W{g}"] = (e + ctx, h)
        manifest[f"dec_U{g}"] = (h, h)
        manifest[f"dec_b{g}"] = (1, h)
    manifest["dec_init_W"] = (h, h)
    manifest["dec_init_b"] = (1, h)
    manifest["att_W"] = (h, a)
    manifest["att_U"] = (ctx, a)
    manifest["att_V"] = (e, a)
    manifest["att_b"] = (1, a)
    manifest["att_v"] = (a, 1)
    manifest["out_W"] = (e + h + ctx, config.tgt_vocab)
    manifest["out_b"] = (1, config.tgt_vocab)
    return manifest


INIT_SCALE = 0.08


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Uniform [-0.08, 0.08] initialization of every tensor, seedable."""
    rng = np.random.default_rng(seed)
    return {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        for name, shape in shape_manifest(config).items()
    }


def validate_params(config: ModelConfig, params: dict[str, np.ndarray]) -> None:
    manifest = shape_manifest(config)
    missing = sorted(set(manifest) - set(params))
    extra = sorted(set(params) - set(manifest))
    if missing or extra:
        raise CheckpointError(f"tensor names mismatch: missing={missing} extra={extra}")
    for name, shape in manifest.items():
        if tuple(params[name].shape) != shape:
            raise CheckpointError(
                f"tensor {name} has shape {tuple(params[name].shape)}, manifest says {shape}"
            )
        if not np.all(np.isfinite(params[name])):
            raise CheckpointError(f"tensor {name} contains non-finite entries")


@dataclass
class BoundModel:
    """Model parameters bound to one tape as leaf nodes."""

    config: ModelConfig
    p: dict[str, Node]
    tape: Tape


def bind(config: ModelConfig, params: dict[str, np.ndarray], tape: Tape) -> BoundModel:
    return BoundModel(config, {k: tape.leaf(v) for k, v in params.items()}, tape)


@dataclass
class EncoderStates:
    """Per-position source encodings: row i is concat(forward_i, backward_i)."""

    states: Node
    backward_first: Node
    att_proj: Node | None = field(default=None, repr=False)

    @property
    def length(self) -> int:
        return self.states.value.shape[0]


@dataclass
class DecoderState:
    """One decoder timestep: hidden state, context vector, attention row."""

    h: Node
    c: Node
    alpha: Node


def _gru_step(model: BoundModel, prefix: str, x: Node, h_prev: Node) -> Node:
    p = model.p
    z = (x @ p[f"{prefix}_Wz"] + h_prev @ p[f"{prefix}_Uz"] + p[f"{prefix}_bz"]).sigmoid()
    r = (x @ p[f"{prefix}_Wr"] + h_prev @ p[f"{prefix}_Ur"] + p[f"{prefix}_br"]).sigmoid()
    cand = (x @ p[f"{prefix}_Wh"] + (r * h_prev) @ p[f"{prefix}_Uh"] + p[f"{prefix}_bh"]).tanh()
    # h = (1 - z) * h_prev + z * cand, written without a ones constant
    return h_prev + z * (cand - h_prev)


def _embedding(model: BoundModel, table: str, index: int) -> Node:
    limit = model.p[table].value.shape[0]
    if not (0 <= index < limit):
        raise DomainError(f"token index {index} out of range for {table} of size {limit}")
    return model.p[table].row(index)


def encode(x, model: BoundModel) -> EncoderStates:
    """Bidirectional encoding of a source index sequence (eol included)."""
    h = model.config.hidden_dim
    embs = [_embedding(model, "src_emb", i) for i in x]

    zero = model.tape.leaf(np.zeros((1, h)))
    fwd_states = []
    state = zero
    for e in embs:
        state = _gru_step(model, "enc_fwd", e, state)
        fwd_states.append(state)

    bwd_states: list[Node | None] = [None] * len(embs)
    state = zero
    for pos in range(len(embs) - 1, -1, -1):
        state = _gru_step(model, "enc_bwd", embs[pos], state)
        bwd_states[pos] = state

    rows = [concat_cols([f, b]) for f, b in zip(fwd_states, bwd_states)]
    return EncoderStates(states=concat_rows(rows), backward_first=bwd_states[0])


def initial_state(enc: EncoderStates, model: BoundModel) -> Node:
    """Decoder start state: tanh projection of the backward encoder state
    at the first source position."""
    return (enc.backward_first @ model.p["dec_init_W"] + model.p["dec_init_b"]).tanh()


def _attend(emb_prev: Node, h_prev: Node, enc: EncoderStates, model: BoundModel) -> Node:
    p = model.p
    if enc.att_proj is None:
        enc.att_proj = enc.states @ p["att_U"]
    query = h_prev @ p["att_W"] + emb_prev @ p["att_V"] + p["att_b"]
    scores = (enc.att_proj + query).tanh() @ p["att_v"]
    return scores.transpose().softmax_row()


def attend(y_prev: int, h_prev: Node, enc: EncoderStates, model: BoundModel) -> Node:
    """Attention row over all source positions (eol column included)."""
    return _attend(_embedding(model, "tgt_emb", y_prev), h_prev, enc, model)


def decoder_step(
    y_prev: int, h_prev: Node, enc: EncoderStates, model: BoundModel
) -> tuple[DecoderState, Node]:
    """Advance the decoder one step; returns the new state and the
    next-word distribution."""
    emb_prev = _embedding(model, "tgt_emb", y_prev)
    alpha = _attend(emb_prev, h_prev, enc, model)
    c = alpha @ enc.states
    h = _gru_step(model, "dec", concat_cols([emb_prev, c]), h_prev)
    logits = concat_cols([emb_prev, h, c]) @ model.p["out_W"] + model.p["out_b"]
    return DecoderState(h=h, c=c, alpha=alpha), logits.softmax_row()


@dataclass
class ForwardPass:
    """Teacher-forced pass: per-step gold log-probabilities and attention rows."""

    log_probs: list[Node]
    alpha_rows: list[Node]

    def gold_log_probs(self) -> np.ndarray:
        return np.array([lp.value[0, 0] for lp in self.log_probs])

    def alpha_matrix(self) -> np.ndarray:
        return np.vstack([a.value for a in self.alpha_rows])


def forward_teacher_forced(pair: SentencePair, model: BoundModel) -> ForwardPass:
    """Run the decoder over the gold target (eol as the start symbol),
    collecting gold-token log-probabilities and the predicted attention
    matrix row by row."""
    enc = encode(pair.source, model)
    h = initial_state(enc, model)
    inputs = (EOL,) + pair.target[:-1]
    log_probs = []
    alpha_rows = []
    for y_prev, gold in zip(inputs, pair.target):
        state, probs = decoder_step(y_prev, h, enc, model)
        log_probs.append(probs.pick(0, gold).log())
        alpha_rows.append(state.alpha)
        h = state.h
    return ForwardPass(log_probs=log_probs, alpha_rows=alpha_rows)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(
    path,
    config: ModelConfig,
    params: dict[str, np.ndarray],
    src_vocab: Vocab,
    tgt_vocab: Vocab,
) -> None:
    """Versioned text checkpoint: config, both vocabularies, then every
    tensor (name, rows, cols, row-major values)."""
    validate_params(config, params)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
        f.write(f"embed_dim {config.embed_dim}\n")
        f.write(f"hidden_dim {config.hidden_dim}\n")
        f.write(f"attn_dim {config.attention_dim}\n")
        f.write(f"vocab src {src_vocab.size}\n")
        for t in src_vocab.tokens:
            f.write(t + "\n")
        f.write(f"vocab tgt {tgt_vocab.size}\n")
        for t in tgt_vocab.tokens:
            f.write(t + "\n")
        for name, shape in shape_manifest(config).items():
            tensor = params[name]
            f.write(f"tensor {name} {shape[0]} {shape[1]}\n")
            for row in tensor:
                f.write(" ".join(repr(v) for v in row) + "\n")
        f.write("end\n")


def load_checkpoint(path) -> tuple[ModelConfig, dict[str, np.ndarray], Vocab, Vocab]:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    it = iter(lines)

    def next_line() -> str:
        try:
            return next(it)
        except StopIteration:
            raise CheckpointError("unexpected end of checkpoint") from None

    head = next_line().split()
    if len(head) != 2 or head[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"not a checkpoint file: {path}")
    if int(head[1]) != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {head[1]}")

    dims = {}
    for key in ("embed_dim", "hidden_dim", "attn_dim"):
        name, value = next_line().split()
        if name != key:
            raise CheckpointError(f"expected {key}, found {name}")
        dims[key] = int(value)

    vocabs = {}
    for side in ("src", "tgt"):
        tag, name, count = next_line().split()
        if tag != "vocab" or name != side:
            raise CheckpointError(f"expected vocab {side} header")
        vocabs[side] = Vocab(tuple(next_line() for _ in range(int(count))))

    config = ModelConfig(
        src_vocab=vocabs["src"].size,
        tgt_vocab=vocabs["tgt"].size,
        embed_dim=dims["embed_dim"],
        hidden_dim=dims["hidden_dim"],
        attn_dim=dims["attn_dim"],
    )
    manifest = shape_manifest(config)
    params: dict[str, np.ndarray] = {}
    for expected_name, shape in manifest.items():
        parts = next_line().split()
        if len(parts) != 4 or parts[0] != "tensor":
            raise CheckpointError(f"expected tensor header for {expected_name}")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        if name != expected_name or (rows, cols) != shape:
            raise CheckpointError(
                f"tensor {name} ({rows}x{cols}) does not match manifest entry "
                f"{expected_name} {shape}"
            )
        data = np.empty(shape, dtype=np.float64)
        for r in range(rows):
            row = next_line().split()
            if len(row) != cols:
                raise CheckpointError(f"tensor {name} row {r} has {len(row)} values")
            data[r] = [float(v) for v in row]
        params[name] = data
    if next_line() != "end":
        raise CheckpointError("missing end marker")
    validate_params(config, params)
    return config, params, vocabs["src"], vocabs["tgt"]
