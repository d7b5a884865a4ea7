"""Pick one translation per sentence out of several candidate systems."""

from __future__ import annotations

import hashlib
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import VectorError
from .vectors import as_vector

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


@dataclass(frozen=True)
class Candidate:
    system: str
    text: str
    embedding: np.ndarray


@dataclass(frozen=True)
class CandidateSet:
    source_text: str
    source_embedding: np.ndarray
    candidates: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("a candidate set needs at least one candidate")
        dim = as_vector(self.source_embedding).size
        for c in self.candidates:
            if as_vector(c.embedding).size != dim:
                raise VectorError(f"candidate {c.system!r} embedding dim differs from the source's {dim}")


def _unit(v) -> np.ndarray:
    arr = as_vector(v)
    n = math.sqrt(float(np.dot(arr, arr)))
    if n == 0.0:
        raise VectorError("zero embedding in candidate set")
    return arr / n


def select_by_embedding(cset: CandidateSet) -> tuple[int, list[float]]:
    """Index of the candidate closest to the source (max cosine, min ``1 - cos``).

    Ties go to the lowest index.  Also returns every candidate's similarity.
    """
    src = _unit(cset.source_embedding)
    sims = [float(np.dot(src, _unit(c.embedding))) for c in cset.candidates]
    best = 0
    for i, s in enumerate(sims):
        if s > sims[best]:
            best = i
    return best, sims


def select_by_external_score(scores: Sequence[float], direction: str = MINIMIZE) -> int:
    """Winner by a score computed elsewhere (e.g. perplexity); ties go to the lowest index."""
    if not scores:
        raise ValueError("no scores")
    if direction not in (MAXIMIZE, MINIMIZE):
        raise ValueError(f"direction must be {MAXIMIZE!r} or {MINIMIZE!r}")
    for i, s in enumerate(scores):
        if not math.isfinite(s):
            raise ValueError(f"score {i} is not finite: {s!r}")
    sign = 1.0 if direction == MAXIMIZE else -1.0
    best = 0
    for i, s in enumerate(scores):
        if sign * s > sign * scores[best]:
            best = i
    return best


def text_key(text: str) -> str:
    """Vector-store key for a piece of text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
