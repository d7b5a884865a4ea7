"""chrF++: character n-gram F-score with word n-grams added.

For every character order 1..char_order and word order 1..word_order the
matched, hypothesis and reference n-gram counts give a per-order
F-beta; the score is 100 times their mean.  Corpus scores sum the counts over
all segments before computing F (micro-average).
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChrfConfig:
    char_order: int = 6
    word_order: int = 2
    beta: float = 2.0
    lowercase: bool = False

    def __post_init__(self) -> None:
        if self.char_order < 1:
            raise ValueError("char_order must be >= 1")
        if self.word_order < 0:
            raise ValueError("word_order must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def n_orders(self) -> int:
        return self.char_order + self.word_order

    def to_json(self) -> dict:
        return {"char_order": self.char_order, "word_order": self.word_order,
                "beta": self.beta, "lowercase": self.lowercase}


def char_ngrams(text: str, n: int) -> Counter[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    chars = "".join(text.split())
    return Counter(chars[i : i + n] for i in range(len(chars) - n + 1))


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def word_tokens(text: str) -> list[str]:
    """Whitespace tokens, with every punctuation character split off as its own token."""
    return "".join(f" {ch} " if _is_punct(ch) else ch for ch in text).split()


def _word_ngrams_from_tokens(tokens: list[str], n: int) -> Counter[str]:
    return Counter(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def word_ngrams(text: str, n: int) -> Counter[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return _word_ngrams_from_tokens(word_tokens(text), n)


class NgramStats:
    """Per-order (matched, hyp, ref) counts; char orders first, then word orders."""

    __slots__ = ("counts",)

    def __init__(self, counts: np.ndarray) -> None:
        self.counts = counts

    @classmethod
    def zeros(cls, n_orders: int) -> NgramStats:
        return cls(np.zeros((n_orders, 3), dtype=np.int64))

    def __add__(self, other: NgramStats) -> NgramStats:
        return NgramStats(self.counts + other.counts)

    def __iadd__(self, other: NgramStats) -> NgramStats:
        self.counts += other.counts
        return self


def _order_stats(hyp: Counter[str], ref: Counter[str]) -> tuple[int, int, int]:
    matched = sum(min(c, ref[g]) for g, c in hyp.items() if g in ref)
    return matched, sum(hyp.values()), sum(ref.values())


def segment_stats(hyp: str, ref: str, config: ChrfConfig = ChrfConfig()) -> NgramStats:
    if config.lowercase:
        hyp, ref = hyp.lower(), ref.lower()
    rows = [_order_stats(char_ngrams(hyp, n), char_ngrams(ref, n)) for n in range(1, config.char_order + 1)]
    if config.word_order:
        ht, rt = word_tokens(hyp), word_tokens(ref)
        rows += [
            _order_stats(_word_ngrams_from_tokens(ht, n), _word_ngrams_from_tokens(rt, n))
            for n in range(1, config.word_order + 1)
        ]
    return NgramStats(np.asarray(rows, dtype=np.int64).reshape(config.n_orders, 3))


def f_beta(matched: int, hyp: int, ref: int, beta: float) -> float:
    p = matched / hyp if hyp > 0 else 0.0
    r = matched / ref if ref > 0 else 0.0
    b2 = beta * beta
    denom = b2 * p + r
    return (1 + b2) * p * r / denom if denom > 0 else 0.0


def score_from_stats(stats: NgramStats, beta: float = 2.0) -> float:
    """100 x mean per-order F.  Orders where neither side has any n-gram are left out."""
    fs = [
        f_beta(int(m), int(h), int(r), beta)
        for m, h, r in stats.counts
        if h > 0 or r > 0
    ]
    if not fs:
        return 0.0
    return 100.0 * sum(fs) / len(fs)


def _check_ref(ref: str, where: str = "") -> None:
    if not ref.strip():
        raise ValueError(f"empty reference{where}")


def sentence_chrf(hyp: str, ref: str, config: ChrfConfig = ChrfConfig()) -> float:
    _check_ref(ref)
    return score_from_stats(segment_stats(hyp, ref, config), config.beta)


def corpus_stats(hyps: Sequence[str], refs: Sequence[str], config: ChrfConfig = ChrfConfig()) -> NgramStats:
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    total = NgramStats.zeros(config.n_orders)
    for i, (h, r) in enumerate(zip(hyps, refs)):
        _check_ref(r, f" at segment {i}")
        total += segment_stats(h, r, config)
    return total


def corpus_chrf(hyps: Sequence[str], refs: Sequence[str], config: ChrfConfig = ChrfConfig()) -> float:
    return score_from_stats(corpus_stats(hyps, refs, config), config.beta)
