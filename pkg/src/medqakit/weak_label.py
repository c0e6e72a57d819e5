"""Weak labeling: repurpose yes/no QA sources into extractive QA pairs.

The conclusions text becomes the context and the BM25-best sentence becomes
the answer. Question tokens are filtered against a fixed stopword list
before scoring; with only a handful of candidate sentences, per-set idf
otherwise hands hapax function words ("to", "with") the largest weights and
the selected sentence stops tracking the question's content words.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .bm25 import Bm25Params, best_sentence
from .corpus import (
    DatasetSubsetId,
    Provenance,
    QAPair,
    Sentence,
    normalize_answer,
    segment_sentences,
)
from .errors import ValidationError

log = logging.getLogger(__name__)

# Lucene's EnglishAnalyzer default stopword set.
QUERY_STOPWORDS: frozenset[str] = frozenset(
    """a an and are as at be but by for if in into is it no not of on or such
    that the their then there these they this to was will with""".split()
)

PRIME_SUBSET: dict[DatasetSubsetId, DatasetSubsetId] = {
    DatasetSubsetId.PQA_L: DatasetSubsetId.D1,
    DatasetSubsetId.PQA_A: DatasetSubsetId.D2,
}


@dataclass(frozen=True)
class SourceInstance:
    """Raw yes/no-style source record; context may still be degenerate."""

    id: str
    question: str
    context: str
    label: str | None = None


@dataclass(frozen=True)
class WeakLabelRecord:
    pair: QAPair
    source_subset: DatasetSubsetId
    bm25_score: float
    n_candidates: int


def select_answer_sentence(
    question: str,
    context: str,
    params: Bm25Params = Bm25Params(),
    *,
    stopwords: frozenset[str] | None = QUERY_STOPWORDS,
) -> tuple[Sentence, float, int]:
    """Pick the best-matching context sentence; raises on degenerate context."""
    if not context.strip():
        raise ValidationError("degenerate context: empty conclusions text")
    sentences = segment_sentences(context)
    if not sentences:
        raise ValidationError("degenerate context: no sentences found")
    index, score = best_sentence(question, sentences, params, stopwords=stopwords)
    return sentences[index], score, len(sentences)


def weak_label(
    question: str,
    conclusions_text: str,
    params: Bm25Params = Bm25Params(),
    *,
    pair_id: str,
    source_subset: DatasetSubsetId = DatasetSubsetId.PQA_L,
    stopwords: frozenset[str] | None = QUERY_STOPWORDS,
) -> WeakLabelRecord:
    """Label one record: context = conclusions verbatim, answer = best sentence."""
    if source_subset not in PRIME_SUBSET:
        raise ValidationError(f"source subset must be pqa_l or pqa_a, got {source_subset}")
    sentence, score, n_candidates = select_answer_sentence(
        question, conclusions_text, params, stopwords=stopwords
    )
    pair = QAPair(
        id=pair_id,
        question=question,
        context=conclusions_text,
        answer_text=sentence.text,
        answer_start=sentence.char_start,
        subset=PRIME_SUBSET[source_subset],
        provenance=Provenance.BM25_WEAK,
    )
    return WeakLabelRecord(
        pair=pair, source_subset=source_subset, bm25_score=score, n_candidates=n_candidates
    )


def build_prime_subset(
    instances: Iterable[SourceInstance],
    subset: DatasetSubsetId,
    params: Bm25Params = Bm25Params(),
    *,
    stopwords: frozenset[str] | None = QUERY_STOPWORDS,
) -> tuple[list[WeakLabelRecord], int]:
    """Weak-label a whole source subset, preserving input order.

    Degenerate inputs (empty conclusions or question) are skipped, not
    fatal; returns (records, skipped_count).
    """
    if subset not in PRIME_SUBSET:
        raise ValidationError(f"subset must be pqa_l or pqa_a, got {subset}")
    records: list[WeakLabelRecord] = []
    skipped = 0
    for instance in instances:
        if not instance.question.strip():
            log.warning("skipping %s: empty question", instance.id)
            skipped += 1
            continue
        try:
            records.append(
                weak_label(
                    instance.question,
                    instance.context,
                    params,
                    pair_id=instance.id,
                    source_subset=subset,
                    stopwords=stopwords,
                )
            )
        except ValidationError as exc:
            log.warning("skipping %s: %s", instance.id, exc)
            skipped += 1
    return records, skipped


def agreement_score(gold: Sequence[QAPair], predicted: Sequence[QAPair]) -> float:
    """Fraction of ids whose answers match after normalization."""
    gold_by_id = {p.id: p for p in gold}
    pred_by_id = {p.id: p for p in predicted}
    if len(gold_by_id) != len(gold) or len(pred_by_id) != len(predicted):
        raise ValidationError("duplicate ids in gold or predicted answers")
    unmatched = sorted(set(gold_by_id) ^ set(pred_by_id))
    if unmatched:
        raise ValidationError(f"gold/predicted ids do not align: {unmatched}")
    if not gold_by_id:
        raise ValidationError("nothing to compare: empty answer lists")
    same = sum(
        1
        for pair_id, g in gold_by_id.items()
        if normalize_answer(g.answer_text) == normalize_answer(pred_by_id[pair_id].answer_text)
    )
    return same / len(gold_by_id)
