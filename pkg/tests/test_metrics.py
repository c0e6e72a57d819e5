import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medqakit import (
    DatasetSubsetId,
    EvalReport,
    Prediction,
    Provenance,
    QAPair,
    ValidationError,
    YesNoInstance,
    evaluate,
    exact_match,
    normalize_answer,
    token_f1,
)


class TestExactMatch:
    def test_verbatim(self):
        assert exact_match("the answer", ["the answer"]) == 1

    def test_normalization_forced(self):
        assert exact_match("The answer", ["answer"]) == 1

    def test_mismatch(self):
        assert exact_match("answer one", ["answer two"]) == 0

    def test_any_gold_suffices(self):
        assert exact_match("beta", ["alpha", "beta"]) == 1

    def test_empty_golds_rejected(self):
        with pytest.raises(ValidationError):
            exact_match("x", [])


class TestTokenF1:
    def test_hand_computed_example(self):
        # overlap 2, precision 2/3, recall 1, harmonic mean 0.8
        assert token_f1("tear gland inflammation", ["gland inflammation"]) == pytest.approx(
            0.8, abs=1e-12
        )

    def test_identity(self):
        assert token_f1("exact same text", ["exact same text"]) == 1.0

    def test_disjoint(self):
        assert token_f1("alpha beta", ["gamma delta"]) == 0.0

    def test_max_over_golds(self):
        assert token_f1("alpha beta", ["gamma", "alpha beta"]) == 1.0

    def test_both_empty_after_normalization(self):
        assert token_f1("the", ["a"]) == 1.0

    def test_one_empty_after_normalization(self):
        assert token_f1("the", ["word"]) == 0.0

    def test_multiset_overlap(self):
        # repeated token counts once per occurrence matched
        assert token_f1("x x y", ["x y y"]) == pytest.approx(2 / 3)

    @given(st.text(max_size=40))
    @settings(max_examples=200)
    def test_self_f1_is_one_for_nonempty(self, text):
        if normalize_answer(text):
            assert token_f1(text, [text]) == 1.0

    @given(st.text(max_size=40), st.text(max_size=40))
    @settings(max_examples=300)
    def test_exact_match_implies_unit_f1(self, pred, gold):
        if exact_match(pred, [gold]) == 1:
            assert token_f1(pred, [gold]) == 1.0

    @given(st.text(max_size=40), st.text(max_size=40))
    @settings(max_examples=300)
    def test_normalization_invariance(self, pred, gold):
        assert token_f1(pred, [gold]) == token_f1(normalize_answer(pred), [normalize_answer(gold)])
        assert exact_match(pred, [gold]) == exact_match(
            normalize_answer(pred), [normalize_answer(gold)]
        )


def _gold_pairs():
    pairs = []
    for i, answer in enumerate(["tear gland inflammation", "blood glucose control"]):
        context = f"{answer} appeared in the study."
        pairs.append(
            QAPair(
                id=f"g{i}",
                question="What was observed?",
                context=context,
                answer_text=answer,
                answer_start=0,
                subset=DatasetSubsetId.D1,
                provenance=Provenance.BM25_WEAK,
            )
        )
    return pairs


class TestEvaluate:
    def test_perfect_predictions(self):
        golds = _gold_pairs()
        preds = [Prediction(id=g.id, predicted_text=g.answer_text) for g in golds]
        report = evaluate(golds, preds, "extractive")
        assert report.exact_match == 100.0
        assert report.f1 == 100.0
        assert report.n == 2

    def test_half_exact_mean_f1(self):
        golds = _gold_pairs()
        preds = [
            Prediction(id="g0", predicted_text="tear gland inflammation"),
            Prediction(id="g1", predicted_text="glucose control"),  # P=1, R=2/3 -> F1=0.8
        ]
        report = evaluate(golds, preds, "extractive")
        assert report.exact_match == pytest.approx(50.0)
        assert report.f1 == pytest.approx(90.0)

    def test_yesno_accuracy_scale(self):
        golds = [
            YesNoInstance(id=f"y{i}", question="q?", context="c", label="yes" if i < 66 else "no")
            for i in range(100)
        ]
        preds = [Prediction(id=g.id, predicted_label="yes") for g in golds]
        report = evaluate(golds, preds, "yesno")
        assert report.accuracy == pytest.approx(0.66)
        assert report.exact_match is None and report.f1 is None
        assert 0.0 <= report.accuracy <= 1.0

    def test_missing_prediction_listed(self):
        golds = _gold_pairs()
        with pytest.raises(ValidationError, match="g1"):
            evaluate(golds, [Prediction(id="g0", predicted_text="x")], "extractive")

    def test_extra_prediction_listed(self):
        golds = _gold_pairs()
        preds = [Prediction(id=g.id, predicted_text="x") for g in golds]
        preds.append(Prediction(id="ghost", predicted_text="x"))
        with pytest.raises(ValidationError, match="ghost"):
            evaluate(golds, preds, "extractive")

    def test_prediction_order_irrelevant(self):
        golds = _gold_pairs()
        preds = [Prediction(id=g.id, predicted_text=g.answer_text) for g in golds]
        rng = random.Random(3)
        reports = []
        for _ in range(5):
            rng.shuffle(preds)
            reports.append(evaluate(golds, preds, "extractive"))
        assert len(set(reports)) == 1

    def test_unknown_task(self):
        with pytest.raises(ValidationError, match="task"):
            evaluate(_gold_pairs(), [], "ranking")

    def test_empty_golds_rejected(self):
        with pytest.raises(ValidationError):
            evaluate([], [], "extractive")

    def test_report_serialization(self):
        report = EvalReport(n=3, exact_match=66.7, f1=70.0)
        assert report.to_dict() == {"n": 3, "exact_match": 66.7, "f1": 70.0}
