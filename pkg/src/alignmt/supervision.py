"""Conversion of hard word alignments into soft attention supervision.

External aligners emit hard links: a target word may be linked to several
source words or to none, which is not a distribution.  The conversion
rules: a target word with k links puts mass 1/k on each linked source
word; an unlinked target word inherits the full soft row of the closest
linked target word, ties resolved to the right; the end-of-sentence
positions are aligned to each other.  If no target word is linked at all,
every word row falls back to uniform mass over the real source words.

The resulting matrix has ``n + 1`` rows (target words then eol) and
``m + 1`` columns (source words then eol), every row summing to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class HardAlignment:
    """A set of 0-based (source_index, target_index) links for one pair."""

    links: frozenset[tuple[int, int]]
    m: int
    n: int

    def __post_init__(self):
        for i, j in self.links:
            if not (0 <= i < self.m):
                raise ParseError(f"source index {i} out of range for m={self.m}")
            if not (0 <= j < self.n):
                raise ParseError(f"target index {j} out of range for n={self.n}")


def parse_pharaoh(line: str, m: int, n: int, swap: bool = False) -> HardAlignment:
    """Parse one Pharaoh line ("i-j" pairs, space separated, 0-based).

    By convention i indexes the source and j the target; ``swap=True``
    reads the opposite convention.  A blank line is an empty link set.
    """
    links = set()
    for pos, token in enumerate(line.split()):
        head, sep, tail = token.partition("-")
        if not sep or not head.isdigit() or not tail.isdigit():
            raise ParseError(f"malformed alignment token {token!r} at position {pos}")
        i, j = int(head), int(tail)
        if swap:
            i, j = j, i
        if i >= m:
            raise ParseError(
                f"source index {i} >= m={m} in token {token!r} at position {pos}"
            )
        if j >= n:
            raise ParseError(
                f"target index {j} >= n={n} in token {token!r} at position {pos}"
            )
        links.add((i, j))
    return HardAlignment(frozenset(links), m, n)


def to_supervision(hard: HardAlignment) -> np.ndarray:
    """Row-stochastic (n+1) x (m+1) supervision matrix for one pair."""
    m, n = hard.m, hard.n
    out = np.zeros((n + 1, m + 1), dtype=np.float64)

    sources_of: dict[int, list[int]] = {}
    for i, j in hard.links:
        sources_of.setdefault(j, []).append(i)

    linked_rows = sorted(sources_of)
    for t in linked_rows:
        srcs = sources_of[t]
        out[t, srcs] = 1.0 / len(srcs)

    if linked_rows:
        for t in range(n):
            if t in sources_of:
                continue
            # closest linked target position, right one wins on a tie
            donor = min(linked_rows, key=lambda tp: (abs(tp - t), -tp))
            out[t, :] = out[donor, :]
    elif m > 0:
        out[:n, :m] = 1.0 / m
    else:
        # degenerate empty source: nothing but the eol column exists
        out[:n, m] = 1.0

    out[n, m] = 1.0
    return out


def is_row_stochastic(matrix: np.ndarray, tol: float = ROW_SUM_TOL) -> bool:
    return bool(
        np.all(matrix >= 0.0)
        and np.all(np.abs(matrix.sum(axis=1) - 1.0) <= tol)
    )


def load_alignments(lines, pairs, swap: bool = False) -> list[np.ndarray]:
    """Supervision matrices for a corpus of pairs from Pharaoh lines."""
    from .errors import ConsistencyError

    if len(lines) != len(pairs):
        raise ConsistencyError(
            f"alignment line count {len(lines)} != pair count {len(pairs)}"
        )
    mats = []
    for lineno, (line, pair) in enumerate(zip(lines, pairs)):
        try:
            hard = parse_pharaoh(line, pair.m, pair.n, swap=swap)
        except ParseError as e:
            raise ParseError(f"line {lineno + 1}: {e}") from None
        mats.append(to_supervision(hard))
    return mats
