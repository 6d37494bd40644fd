"""Corpus ingestion: vocabularies, token encoding, length filtering, batching.

Corpora are UTF-8 text files, one pre-tokenized sentence per line, tokens
separated by single spaces.  Parallel corpora are two files with equal
line counts.  Every encoded sentence ends with the reserved end-of-sentence
index; unknown tokens map to the reserved unknown index.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConsistencyError, DomainError

EOL = 0
UNK = 1
EOL_TOKEN = "<eol>"
UNK_TOKEN = "<unk>"
RESERVED = 2


@dataclass(frozen=True)
class Vocab:
    """Bidirectional token/index map with reserved eol (0) and unk (1)."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.tokens[:RESERVED] != (EOL_TOKEN, UNK_TOKEN):
            raise DomainError("vocab must reserve index 0 for eol and 1 for unk")

    @property
    def size(self) -> int:
        return len(self.tokens)

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    def lookup(self, token: str) -> int:
        return self.index_of.get(token, UNK)

    def encode(self, line: str) -> list[int]:
        """Indices for a whitespace-tokenized line, with the eol appended."""
        return [self.lookup(t) for t in line.split()] + [EOL]

    def decode(self, indices) -> str:
        """Surface string for an index sequence; one trailing eol is dropped."""
        idx = list(indices)
        if idx and idx[-1] == EOL:
            idx = idx[:-1]
        return " ".join(self.tokens[i] for i in idx)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t in self.tokens:
                f.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            return cls(tuple(line.rstrip("\n") for line in f))


def build_vocab(corpus, cap: int) -> Vocab:
    """Keep the ``cap - 2`` most frequent tokens, ties broken alphabetically.

    ``corpus`` is an iterable of token lines.  Determinism: an identical
    corpus always yields the identical index assignment.
    """
    if cap < 3:
        raise DomainError(f"vocab cap must be at least 3, got {cap}")
    counts: Counter[str] = Counter()
    n_lines = 0
    for line in corpus:
        n_lines += 1
        counts.update(line.split())
    if n_lines == 0:
        raise DomainError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [t for t, _ in ranked[: cap - RESERVED]]
    return Vocab((EOL_TOKEN, UNK_TOKEN) + tuple(kept))


@dataclass(frozen=True)
class SentencePair:
    """Encoded source/target index sequences, each ending with the eol index."""

    source: tuple[int, ...]
    target: tuple[int, ...]

    def __post_init__(self):
        if not self.source or not self.target:
            raise DomainError("sentence pair sides must be non-empty")
        if self.source[-1] != EOL or self.target[-1] != EOL:
            raise DomainError("sentence pair sides must end with the eol index")

    @property
    def m(self) -> int:
        """Source length excluding the eol."""
        return len(self.source) - 1

    @property
    def n(self) -> int:
        """Target length excluding the eol."""
        return len(self.target) - 1


def encode_pairs(src_lines, tgt_lines, src_vocab: Vocab, tgt_vocab: Vocab) -> list[SentencePair]:
    if len(src_lines) != len(tgt_lines):
        raise ConsistencyError(
            f"parallel corpus line counts differ: {len(src_lines)} vs {len(tgt_lines)}"
        )
    return [
        SentencePair(tuple(src_vocab.encode(s)), tuple(tgt_vocab.encode(t)))
        for s, t in zip(src_lines, tgt_lines)
    ]


def length_ok(pair: SentencePair, max_len: int) -> bool:
    return pair.m <= max_len and pair.n <= max_len


def filter_by_length(pairs, max_len: int) -> list[SentencePair]:
    """Keep pairs whose pre-eol lengths are both at most ``max_len``."""
    if max_len < 1:
        raise DomainError(f"max_len must be at least 1, got {max_len}")
    return [p for p in pairs if length_ok(p, max_len)]


@dataclass
class Batch:
    """A slice of the corpus with padded index grids and validity masks.

    Padding positions hold the eol index with mask 0; real tokens
    (including each sentence's eol) have mask 1.  ``supervision`` carries
    one row-stochastic matrix per pair when attention supervision is in use.
    """

    pairs: list[SentencePair]
    src_grid: np.ndarray
    src_mask: np.ndarray
    tgt_grid: np.ndarray
    tgt_mask: np.ndarray
    supervision: list[np.ndarray] | None = None


def _grid(seqs: list[tuple[int, ...]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    grid = np.full((len(seqs), width), EOL, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=np.float64)
    for r, s in enumerate(seqs):
        grid[r, : len(s)] = s
        mask[r, : len(s)] = 1.0
    return grid, mask


def make_batches(
    pairs: list[SentencePair],
    supervision: list[np.ndarray] | None,
    batch_size: int,
    shuffle_seed: int,
) -> list[Batch]:
    """Deterministically shuffled batches; the final short batch is kept."""
    if batch_size < 1:
        raise DomainError(f"batch_size must be at least 1, got {batch_size}")
    if supervision is not None and len(supervision) != len(pairs):
        raise ConsistencyError(
            f"supervision count {len(supervision)} != pair count {len(pairs)}"
        )
    order = list(range(len(pairs)))
    random.Random(shuffle_seed).shuffle(order)
    batches = []
    for lo in range(0, len(order), batch_size):
        chunk = order[lo : lo + batch_size]
        chosen = [pairs[i] for i in chunk]
        src_grid, src_mask = _grid([p.source for p in chosen])
        tgt_grid, tgt_mask = _grid([p.target for p in chosen])
        sup = [supervision[i] for i in chunk] if supervision is not None else None
        batches.append(Batch(chosen, src_grid, src_mask, tgt_grid, tgt_mask, sup))
    return batches


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
