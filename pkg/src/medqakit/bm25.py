"""Okapi BM25 scoring and best-sentence selection over candidate sentences.

Document frequency and average length are computed over the candidate set
alone (the sentences of one section), so scores never depend on corpus
composition and labels stay reproducible as the corpus grows.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import Sentence
from .errors import ContractViolation, ValidationError

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run; empty tokens dropped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValidationError(f"k1 must be non-negative, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class CandidateSet:
    """Tokenized candidates with the statistics BM25 needs; immutable."""

    docs: tuple[tuple[str, ...], ...]
    df: dict[str, int]
    avgdl: float
    n: int


def build_candidates(sentences: Sequence[Sentence | str]) -> CandidateSet:
    """Tokenize candidates and derive df/avgdl over exactly these sentences."""
    docs = tuple(
        tuple(tokenize(s.text if isinstance(s, Sentence) else s)) for s in sentences
    )
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc))
    n = len(docs)
    avgdl = sum(len(d) for d in docs) / n if n else 0.0
    return CandidateSet(docs=docs, df=dict(df), avgdl=avgdl, n=n)


def bm25_score(
    query_tokens: Sequence[str],
    doc_index: int,
    candidates: CandidateSet,
    params: Bm25Params = Bm25Params(),
) -> float:
    """Score one candidate against the query tokens.

    Uses the smoothed idf ln(1 + (n - df + 0.5) / (df + 0.5)), which keeps
    every term weight positive; tokens absent from the candidate contribute
    nothing, so scores are always >= 0.
    """
    if not 0 <= doc_index < candidates.n:
        raise ContractViolation(
            f"doc_index {doc_index} out of range for {candidates.n} candidates"
        )
    doc = candidates.docs[doc_index]
    tf = Counter(doc)
    dl = len(doc)
    rel_len = dl / candidates.avgdl if candidates.avgdl else 0.0
    norm = params.k1 * (1.0 - params.b + params.b * rel_len)
    score = 0.0
    for token in query_tokens:
        freq = tf.get(token, 0)
        if freq == 0:
            continue
        df = candidates.df[token]
        idf = math.log(1.0 + (candidates.n - df + 0.5) / (df + 0.5))
        score += idf * (freq * (params.k1 + 1.0)) / (freq + norm)
    return score


def best_sentence(
    question: str,
    sentences: Sequence[Sentence | str],
    params: Bm25Params = Bm25Params(),
    *,
    stopwords: frozenset[str] | None = None,
) -> tuple[int, float]:
    """Return (index, score) of the highest-scoring sentence.

    Ties break toward the smallest index. An optional stopword set is
    applied to the query tokens only; candidate statistics are untouched.
    """
    if not sentences:
        raise ValidationError("no candidates")
    query = tokenize(question)
    if stopwords:
        query = [t for t in query if t not in stopwords]
    candidates = build_candidates(sentences)
    best_index, best_score = 0, bm25_score(query, 0, candidates, params)
    for i in range(1, candidates.n):
        score = bm25_score(query, i, candidates, params)
        if score > best_score:
            best_index, best_score = i, score
    return best_index, best_score
