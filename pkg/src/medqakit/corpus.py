"""Corpus data model: structured abstracts, QA instances, sentence
segmentation, and answer normalization.

Everything here is pure and stateless; downstream labeling, curation, and
transformation all build on the segmentation and normalization rules defined
in this module, so changing them changes every derived dataset.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable, Iterator

from .errors import ParseError, ValidationError


class DatasetSubsetId(str, Enum):
    """Closed set of dataset subset identifiers used throughout the pipeline."""

    D1 = "d1"  # repurposed human-labelled source, extractive
    D2 = "d2"  # repurposed artificial source, extractive
    D3 = "d3"  # template-curated COVID pairs, manually selected answers
    D4 = "d4"  # automatically curated COVID pairs
    PQA_L = "pqa_l"  # yes/no source, human-labelled
    PQA_A = "pqa_a"  # yes/no source, artificial


class Provenance(str, Enum):
    BM25_WEAK = "bm25_weak"
    TEMPLATE_MANUAL = "template_manual"
    PUBMED_ARTIFICIAL = "pubmed_artificial"


@dataclass(frozen=True)
class AbstractSection:
    """One labelled section of a structured abstract.

    Labels are canonical (uppercased, trimmed) after parsing. Empty sections
    are kept and flagged degenerate rather than dropped, so curation rules
    can reject the abstract deterministically.
    """

    label: str
    text: str

    @property
    def is_degenerate(self) -> bool:
        return not self.text.strip()


@dataclass(frozen=True)
class StructuredAbstract:
    pmid: str
    title: str
    pub_date: date | None
    keywords: tuple[str, ...]
    sections: tuple[AbstractSection, ...]


@dataclass(frozen=True)
class Sentence:
    """A sentence with character offsets into its parent text.

    Invariant: parent[char_start:char_end] == text.
    """

    text: str
    char_start: int
    char_end: int

    def __post_init__(self) -> None:
        if not (0 <= self.char_start < self.char_end):
            raise ValidationError(
                f"invalid sentence span [{self.char_start}, {self.char_end})"
            )
        if self.char_end - self.char_start != len(self.text):
            raise ValidationError("sentence span length does not match text")


@dataclass(frozen=True)
class QAPair:
    """An extractive training instance; the answer is anchored in the context."""

    id: str
    question: str
    context: str
    answer_text: str
    answer_start: int
    subset: DatasetSubsetId
    provenance: Provenance

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValidationError(f"{self.id}: question is empty")
        if not self.context:
            raise ValidationError(f"{self.id}: context is empty")
        end = self.answer_start + len(self.answer_text)
        if self.answer_start < 0 or end > len(self.context) or (
            self.context[self.answer_start : end] != self.answer_text
        ):
            raise ValidationError(
                f"{self.id}: answer span [{self.answer_start}:{end}] "
                "does not reproduce answer_text"
            )


@dataclass(frozen=True)
class YesNoInstance:
    """A yes/no classification training instance."""

    id: str
    question: str
    context: str
    label: str

    def __post_init__(self) -> None:
        if self.label not in ("yes", "no"):
            raise ValidationError(f"{self.id}: label must be 'yes' or 'no', got {self.label!r}")
        if not self.question.strip():
            raise ValidationError(f"{self.id}: question is empty")
        if not self.context.strip():
            raise ValidationError(f"{self.id}: context is empty")


def parse_abstract_record(record: str, line_number: int | None = None) -> StructuredAbstract:
    """Parse one JSON-line abstract record into a validated StructuredAbstract."""
    where = f"line {line_number}" if line_number is not None else "record"
    try:
        raw = json.loads(record)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected a JSON object")

    pmid = raw.get("pmid")
    if not isinstance(pmid, str) or not pmid.strip():
        raise ValidationError(f"{where}: missing or empty field 'pmid'")
    pmid = pmid.strip()

    raw_sections = raw.get("sections")
    if not isinstance(raw_sections, list):
        raise ValidationError(f"{where}: missing field 'sections'")

    sections = []
    for i, sec in enumerate(raw_sections):
        if not isinstance(sec, dict):
            raise ValidationError(f"{where}: sections[{i}] is not an object")
        label = str(sec.get("label", "")).strip().upper()
        if not label:
            raise ValidationError(f"{where}: sections[{i}] has an empty label")
        sections.append(AbstractSection(label=label, text=str(sec.get("text", ""))))

    pub_date = None
    raw_date = raw.get("pub_date")
    if raw_date not in (None, ""):
        try:
            pub_date = date.fromisoformat(str(raw_date))
        except ValueError as exc:
            raise ValidationError(f"{where}: invalid 'pub_date' {raw_date!r}") from exc

    keywords = tuple(str(k) for k in raw.get("keywords") or ())
    return StructuredAbstract(
        pmid=pmid,
        title=str(raw.get("title", "")),
        pub_date=pub_date,
        keywords=keywords,
        sections=tuple(sections),
    )


def serialize_abstract_record(abstract: StructuredAbstract) -> str:
    """Inverse of parse_abstract_record; parse(serialize(a)) == a."""
    obj = {
        "pmid": abstract.pmid,
        "title": abstract.title,
        "pub_date": abstract.pub_date.isoformat() if abstract.pub_date else None,
        "keywords": list(abstract.keywords),
        "sections": [{"label": s.label, "text": s.text} for s in abstract.sections],
    }
    return json.dumps(obj, ensure_ascii=False)


def iter_abstract_records(lines: Iterable[str]) -> Iterator[StructuredAbstract]:
    """Parse JSONL lines, enforcing pmid uniqueness; blank lines are skipped."""
    seen: set[str] = set()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        abstract = parse_abstract_record(line, line_number)
        if abstract.pmid in seen:
            raise ValidationError(f"line {line_number}: duplicate pmid {abstract.pmid!r}")
        seen.add(abstract.pmid)
        yield abstract


# Dotted tokens that end with '.' without ending a sentence.
DEFAULT_ABBREVIATIONS: tuple[str, ...] = (
    "vs.",
    "e.g.",
    "i.e.",
    "et al.",
    "Dr.",
    "Fig.",
    "Figs.",
    "cf.",
    "ca.",
    "approx.",
)

_TERMINATORS = ".?!"


def _ends_with_abbreviation(text: str, dot_index: int, abbreviations: tuple[str, ...]) -> bool:
    chunk = text[: dot_index + 1]
    lowered = chunk.lower()
    for abbr in abbreviations:
        a = abbr.lower()
        if not lowered.endswith(a):
            continue
        boundary = len(chunk) - len(a) - 1
        if boundary < 0 or not chunk[boundary].isalnum():
            return True
    return False


def segment_sentences(
    text: str, abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS
) -> list[Sentence]:
    """Split text into sentences with exact character offsets.

    A sentence boundary is a '.', '?' or '!' immediately followed by
    whitespace and then an uppercase letter or a digit. Terminators inside
    open parentheses and dotted abbreviations do not split; decimals like
    "3.5" never split because the period is not followed by whitespace.
    The returned spans are non-overlapping, in order, and slicing the input
    by each span reproduces the sentence text exactly.
    """
    n = len(text)
    boundaries: list[int] = []
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch in _TERMINATORS and depth == 0:
            j = i + 1
            if j >= n or not text[j].isspace():
                continue
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k >= n:
                continue
            if not (text[k].isupper() or text[k].isdigit()):
                continue
            if ch == "." and _ends_with_abbreviation(text, i, abbreviations):
                continue
            boundaries.append(j)

    sentences: list[Sentence] = []
    start = 0
    for bound in boundaries + [n]:
        lo, hi = start, bound
        while lo < hi and text[lo].isspace():
            lo += 1
        while hi > lo and text[hi - 1].isspace():
            hi -= 1
        if lo < hi:
            sentences.append(Sentence(text=text[lo:hi], char_start=lo, char_end=hi))
        start = bound
    return sentences


_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    t = text.lower().translate(_PUNCT_TABLE)
    t = _ARTICLE_RE.sub(" ", t)
    return " ".join(t.split())
