import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medqakit import (
    DatasetSubsetId,
    ParseError,
    Provenance,
    QAPair,
    ValidationError,
    YesNoInstance,
    normalize_answer,
    parse_abstract_record,
    segment_sentences,
    serialize_abstract_record,
)

MINIMAL = '{"pmid":"1","title":"T?","pub_date":"2020-03-01","keywords":[],"sections":[{"label":"conclusions","text":"A."}]}'


class TestParseAbstractRecord:
    def test_minimal_valid_record(self):
        abstract = parse_abstract_record(MINIMAL)
        assert abstract.pmid == "1"
        assert len(abstract.sections) == 1
        assert abstract.sections[0].label == "CONCLUSIONS"
        assert abstract.pub_date.isoformat() == "2020-03-01"

    def test_missing_pmid_names_field(self):
        with pytest.raises(ValidationError, match="pmid"):
            parse_abstract_record('{"title":"x","sections":[]}')

    def test_missing_sections_names_field(self):
        with pytest.raises(ValidationError, match="sections"):
            parse_abstract_record('{"pmid":"1"}')

    def test_label_trimmed_and_uppercased(self):
        abstract = parse_abstract_record(
            '{"pmid":"1","sections":[{"label":" Results ","text":"x"}]}'
        )
        assert abstract.sections[0].label == "RESULTS"

    def test_malformed_json_reports_line(self):
        with pytest.raises(ParseError, match="line 7"):
            parse_abstract_record("{nope", line_number=7)

    def test_empty_section_label_rejected(self):
        with pytest.raises(ValidationError, match="label"):
            parse_abstract_record('{"pmid":"1","sections":[{"label":"  ","text":"x"}]}')

    def test_missing_pub_date_tolerated(self):
        abstract = parse_abstract_record('{"pmid":"1","sections":[]}')
        assert abstract.pub_date is None

    def test_bad_pub_date_rejected(self):
        with pytest.raises(ValidationError, match="pub_date"):
            parse_abstract_record('{"pmid":"1","pub_date":"03/01/2020","sections":[]}')

    def test_roundtrip_identity(self):
        first = parse_abstract_record(MINIMAL)
        again = parse_abstract_record(serialize_abstract_record(first))
        assert again == first

    def test_degenerate_section_retained_and_flagged(self):
        abstract = parse_abstract_record('{"pmid":"1","sections":[{"label":"X","text":" "}]}')
        assert abstract.sections[0].is_degenerate


class TestSegmentSentences:
    def test_two_clauses(self):
        assert [s.text for s in segment_sentences("A b. C d.")] == ["A b.", "C d."]

    def test_decimal_does_not_split(self):
        texts = [s.text for s in segment_sentences("Dose was 3.5 mg. It worked.")]
        assert texts == ["Dose was 3.5 mg.", "It worked."]

    def test_empty_text(self):
        assert segment_sentences("") == []

    def test_whitespace_only(self):
        assert segment_sentences("   \n ") == []

    def test_abbreviations_do_not_split(self):
        text = "Smith et al. Reported gains. See Fig. 2 for details."
        assert [s.text for s in segment_sentences(text)] == [
            "Smith et al. Reported gains.",
            "See Fig. 2 for details.",
        ]

    def test_question_and_exclamation_terminators(self):
        texts = [s.text for s in segment_sentences("Really? Yes! Done.")]
        assert texts == ["Really?", "Yes!", "Done."]

    def test_lowercase_continuation_does_not_split(self):
        assert len(segment_sentences("approx. five units were given.")) == 1

    def test_no_split_inside_parentheses(self):
        text = "The cohort (n=40. Median age 60) improved. Next sentence."
        assert len(segment_sentences(text)) == 2

    def test_offsets_reproduce_text(self):
        text = "  First one. Second one!  Third?  "
        for sentence in segment_sentences(text):
            assert text[sentence.char_start : sentence.char_end] == sentence.text

    def test_trailing_fragment_without_terminator(self):
        texts = [s.text for s in segment_sentences("Done. and then some")]
        assert texts == ["Done. and then some"]

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_spans_roundtrip_ordered_nonoverlapping(self, text):
        sentences = segment_sentences(text)
        previous_end = -1
        for sentence in sentences:
            assert text[sentence.char_start : sentence.char_end] == sentence.text
            assert sentence.char_start > previous_end
            previous_end = sentence.char_end

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_all_nonspace_characters_covered(self, text):
        covered = set()
        for sentence in segment_sentences(text):
            covered.update(range(sentence.char_start, sentence.char_end))
        for i, ch in enumerate(text):
            if not ch.isspace():
                assert i in covered

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_resegmenting_a_sentence_yields_one_sentence(self, text):
        for sentence in segment_sentences(text):
            assert len(segment_sentences(sentence.text)) == 1


class TestNormalizeAnswer:
    def test_article_and_punctuation(self):
        assert normalize_answer("The Answer.") == "answer"

    def test_whitespace_collapse(self):
        assert normalize_answer("tear  gland   inflammation") == "tear gland inflammation"

    def test_article_removal_is_token_level(self):
        assert normalize_answer("An anomaly") == "anomaly"

    def test_embedded_article_letters_kept(self):
        assert normalize_answer("another theory") == "another theory"

    @given(st.text(max_size=80))
    @settings(max_examples=200)
    def test_idempotent(self, text):
        once = normalize_answer(text)
        assert normalize_answer(once) == once


class TestInstanceInvariants:
    def test_qapair_anchoring_enforced(self):
        with pytest.raises(ValidationError, match="answer span"):
            QAPair(
                id="x",
                question="q?",
                context="some context",
                answer_text="missing",
                answer_start=0,
                subset=DatasetSubsetId.D1,
                provenance=Provenance.BM25_WEAK,
            )

    def test_qapair_valid_span(self):
        pair = QAPair(
            id="x",
            question="q?",
            context="alpha beta",
            answer_text="beta",
            answer_start=6,
            subset=DatasetSubsetId.D1,
            provenance=Provenance.BM25_WEAK,
        )
        assert pair.context[pair.answer_start :] == pair.answer_text

    def test_yesno_label_closed(self):
        with pytest.raises(ValidationError, match="label"):
            YesNoInstance(id="y", question="q?", context="c", label="maybe")
