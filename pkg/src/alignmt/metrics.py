"""Corpus-level translation and alignment quality metrics.

BLEU4 follows the multi-bleu conventions: case-insensitive, corpus-level
modified n-gram precisions with clipping, geometric mean over orders 1-4,
brevity penalty exp(1 - r/c) when the candidate is shorter than the
(closest) reference, and a hard zero when any precision is zero.

Alignment error rate uses the standard sure/possible formulation
AER = 1 - (|A n S| + |A n P|) / (|A| + |S|), micro-averaged over the
corpus.  Gold files are Pharaoh lines where "i-j" marks a sure link and
"i?j" a possible-only link; sure links are possible by construction.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DataError, ParseError

Link = tuple[int, int]

BLEU_ORDER = 4


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _sentence_bleu_stats(candidate: str, references: list[str]):
    """Per-sentence sufficient statistics: clipped matches and totals per
    order, candidate length, closest reference length."""
    cand = candidate.lower().split()
    refs = [r.lower().split() for r in references]
    matches = np.zeros(BLEU_ORDER, dtype=np.int64)
    totals = np.zeros(BLEU_ORDER, dtype=np.int64)
    for n in range(1, BLEU_ORDER + 1):
        counts = _ngrams(cand, n)
        if not counts:
            continue
        best = Counter()
        for ref in refs:
            for gram, c in _ngrams(ref, n).items():
                if c > best[gram]:
                    best[gram] = c
        totals[n - 1] = sum(counts.values())
        matches[n - 1] = sum(min(c, best[gram]) for gram, c in counts.items())
    c_len = len(cand)
    # closest reference length; equal distance resolves to the shorter one
    r_len = min((len(r) for r in refs), key=lambda L: (abs(L - c_len), L))
    return matches, totals, c_len, r_len


def _bleu_from_stats(matches, totals, c_len, r_len) -> float:
    if c_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(BLEU_ORDER):
        if totals[n] == 0 or matches[n] == 0:
            return 0.0
        log_sum += math.log(matches[n] / totals[n])
    bp = 1.0 if c_len > r_len else math.exp(1.0 - r_len / c_len)
    return bp * math.exp(log_sum / BLEU_ORDER)


def _normalize_references(references, count: int) -> list[list[str]]:
    refs = list(references)
    if refs and isinstance(refs[0], str):
        refs = [[r] for r in refs]
    else:
        refs = [list(r) for r in refs]
    if len(refs) != count:
        raise ConsistencyError(f"candidate count {count} != reference count {len(refs)}")
    if any(not r for r in refs):
        raise ConsistencyError("every sentence needs at least one reference")
    return refs


def bleu4(candidates, references) -> float:
    """Case-insensitive corpus BLEU4 in [0, 1].

    ``references`` is either one line per candidate or a list of reference
    sets for multi-reference scoring.
    """
    candidates = list(candidates)
    refs = _normalize_references(references, len(candidates))
    matches = np.zeros(BLEU_ORDER, dtype=np.int64)
    totals = np.zeros(BLEU_ORDER, dtype=np.int64)
    c_len = 0
    r_len = 0
    for cand, ref_set in zip(candidates, refs):
        m, t, c, r = _sentence_bleu_stats(cand, ref_set)
        matches += m
        totals += t
        c_len += c
        r_len += r
    return _bleu_from_stats(matches, totals, c_len, r_len)


# ---------------------------------------------------------------------------
# Alignment error rate
# ---------------------------------------------------------------------------

@dataclass
class AERCounts:
    """Corpus-accumulated link counts for the sure/possible AER formula."""

    a_and_s: int = 0
    a_and_p: int = 0
    a: int = 0
    s: int = 0

    def add(self, system: set[Link], sure: set[Link], possible: set[Link]) -> None:
        self.a_and_s += len(system & sure)
        self.a_and_p += len(system & possible)
        self.a += len(system)
        self.s += len(sure)

    def value(self) -> float:
        denom = self.a + self.s
        if denom == 0:
            return 0.0
        return 1.0 - (self.a_and_s + self.a_and_p) / denom


def aer(system, sure, possible=None) -> float:
    """Corpus-level alignment error rate.

    ``system``, ``sure`` and ``possible`` are per-sentence link sets; when
    ``possible`` is omitted, the gold has no sure/possible distinction and
    P = S.  Sure links must be a subset of possible links.
    """
    system = [set(s) for s in system]
    sure = [set(s) for s in sure]
    possible = sure if possible is None else [set(p) for p in possible]
    if not (len(system) == len(sure) == len(possible)):
        raise ConsistencyError(
            f"sentence counts differ: system={len(system)} sure={len(sure)} "
            f"possible={len(possible)}"
        )
    counts = AERCounts()
    for idx, (a_links, s_links, p_links) in enumerate(zip(system, sure, possible)):
        if not s_links <= p_links:
            raise DataError(f"sentence {idx + 1}: sure links are not a subset of possible links")
        counts.add(a_links, s_links, p_links)
    return counts.value()


def parse_gold_line(line: str) -> tuple[set[Link], set[Link]]:
    """Gold Pharaoh line -> (sure, possible); "i-j" is sure, "i?j" possible-only."""
    sure: set[Link] = set()
    possible: set[Link] = set()
    for pos, token in enumerate(line.split()):
        for sep in ("-", "?"):
            head, mark, tail = token.partition(sep)
            if mark and head.isdigit() and tail.isdigit():
                link = (int(head), int(tail))
                possible.add(link)
                if sep == "-":
                    sure.add(link)
                break
        else:
            raise ParseError(f"malformed gold alignment token {token!r} at position {pos}")
    return sure, possible


def parse_gold_alignments(lines) -> tuple[list[set[Link]], list[set[Link]]]:
    sure_sets = []
    possible_sets = []
    for lineno, line in enumerate(lines):
        try:
            s, p = parse_gold_line(line)
        except ParseError as e:
            raise ParseError(f"line {lineno + 1}: {e}") from None
        sure_sets.append(s)
        possible_sets.append(p)
    return sure_sets, possible_sets


def parse_system_line(line: str) -> set[Link]:
    _, possible = parse_gold_line(line)
    return possible


# ---------------------------------------------------------------------------
# Bootstrap resampling (reporting plumbing)
# ---------------------------------------------------------------------------

def bootstrap_interval(
    per_sentence,
    statistic,
    n_resamples: int = 1000,
    seed: int = 0,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap interval of a corpus statistic.

    ``per_sentence`` is a list of per-sentence records; ``statistic`` maps a
    resampled list of records to a corpus-level value.
    """
    records = list(per_sentence)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n_resamples):
        idx = rng.integers(0, len(records), size=len(records))
        values.append(statistic([records[i] for i in idx]))
    lo = (1.0 - level) / 2.0
    return (
        float(np.quantile(values, lo)),
        float(np.quantile(values, 1.0 - lo)),
    )


def bootstrap_bleu(candidates, references, n_resamples=1000, seed=0) -> tuple[float, float]:
    refs = _normalize_references(references, len(list(candidates)))
    records = list(zip(candidates, refs))
    return bootstrap_interval(
        records,
        lambda rs: bleu4([c for c, _ in rs], [r for _, r in rs]),
        n_resamples=n_resamples,
        seed=seed,
    )


def bootstrap_aer(system, sure, possible=None, n_resamples=1000, seed=0) -> tuple[float, float]:
    possible = sure if possible is None else possible
    records = list(zip(system, sure, possible))
    return bootstrap_interval(
        records,
        lambda rs: aer([a for a, _, _ in rs], [s for _, s, _ in rs], [p for _, _, p in rs]),
        n_resamples=n_resamples,
        seed=seed,
    )
