"""Evaluation formulas: ROUGE-L, perplexity, MLM accuracy, pairing."""

import math

import pytest
from hypothesis import given, strategies as st

from radmask.metrics import (
    EmptyInput,
    EmptyReference,
    NonFiniteLogProb,
    PairingError,
    PositionMismatch,
    evaluate_mlm_accuracy,
    evaluate_perplexity,
    evaluate_rouge,
    lcs_length,
    mean_cross_entropy,
    metric_tokens,
    mlm_accuracy,
    pair_by_id,
    perplexity,
    rouge_l,
)


# ------------------------------------------------------------------ LCS


def test_lcs_on_token_lists():
    assert lcs_length("a b c d".split(), "b d".split()) == 2
    assert lcs_length([], ["x"]) == 0
    assert lcs_length(["x"], ["x"]) == 1


def test_metric_tokens_lowercase_alnum_runs():
    assert metric_tokens("The cat, the CAT!") == ["the", "cat", "the", "cat"]
    assert metric_tokens("x_1 3.5cm") == ["x", "1", "3", "5cm"]
    assert metric_tokens("") == []


# ---------------------------------------------------------------- ROUGE


def test_rouge_worked_example():
    got = rouge_l("the cat sat", "the cat")
    assert got.recall == pytest.approx(2 / 3)
    assert got.precision == 1.0
    assert got.f1 == 0.8  # exact: 2*2/(3+2)


def test_rouge_identical_texts():
    got = rouge_l("no acute process", "no acute process")
    assert (got.recall, got.precision, got.f1) == (1.0, 1.0, 1.0)


def test_rouge_disjoint_texts():
    got = rouge_l("alpha beta", "gamma delta")
    assert (got.recall, got.precision, got.f1) == (0.0, 0.0, 0.0)


def test_rouge_empty_candidate_scores_zero():
    got = rouge_l("something", "")
    assert (got.recall, got.precision, got.f1) == (0.0, 0.0, 0.0)


def test_rouge_empty_reference_raises():
    with pytest.raises(EmptyReference):
        rouge_l("", "candidate")
    with pytest.raises(EmptyReference):
        rouge_l("...", "candidate")  # punctuation-only tokenizes to nothing


def test_rouge_case_and_punctuation_insensitive():
    a = rouge_l("Mild Cardiomegaly.", "mild cardiomegaly")
    assert a.f1 == 1.0


_texts = st.lists(
    st.sampled_from("the cat sat on a mat dog ran".split()), min_size=1, max_size=12
).map(" ".join)


@given(_texts, _texts)
def test_rouge_bounds_and_f1_identity(ref, cand):
    got = rouge_l(ref, cand)
    for v in (got.recall, got.precision, got.f1):
        assert 0.0 <= v <= 1.0
    if got.recall + got.precision == 0:
        assert got.f1 == 0.0
    else:
        want = 2 * got.recall * got.precision / (got.recall + got.precision)
        assert got.f1 == pytest.approx(want, rel=1e-12)


# ----------------------------------------------------------- perplexity


def test_perplexity_certainty():
    assert perplexity([0.0, 0.0, 0.0]) == 1.0


def test_perplexity_half_probs():
    assert perplexity([-1.0, -1.0]) == 2.0


def test_perplexity_mixed_worked_example():
    # probabilities 1/2 and 1/8: H = (1+3)/2 = 2 bits
    assert mean_cross_entropy([-1.0, -3.0]) == 2.0
    assert perplexity([-1.0, -3.0]) == 4.0


def test_perplexity_natural_log_input():
    lp = [math.log(0.5), math.log(0.125)]
    assert perplexity(lp, base="e") == pytest.approx(4.0, rel=1e-12)
    assert mean_cross_entropy(lp, base="e") == pytest.approx(2.0, rel=1e-12)


def test_perplexity_equals_two_to_the_ce():
    import numpy as np

    rng = np.random.default_rng(5)
    for _ in range(50):
        lps = (-rng.exponential(2.0, size=rng.integers(1, 40))).tolist()
        ce = mean_cross_entropy(lps)
        assert perplexity(lps) == pytest.approx(2.0**ce, rel=1e-12)


def test_bad_logprobs_rejected():
    with pytest.raises(NonFiniteLogProb):
        perplexity([0.1])  # log prob above 0
    with pytest.raises(NonFiniteLogProb):
        perplexity([float("nan")])
    with pytest.raises(NonFiniteLogProb):
        perplexity([float("-inf")])
    with pytest.raises(EmptyInput):
        perplexity([])
    with pytest.raises(ValueError):
        mean_cross_entropy([-1.0], base="10")


# -------------------------------------------------------------- pairing


def test_pair_by_id_keeps_left_order():
    left = [{"id": "b"}, {"id": "a"}]
    right = [{"id": "a", "v": 1}, {"id": "b", "v": 2}]
    pairs = pair_by_id(left, right, "l", "r")
    assert [p[0]["id"] for p in pairs] == ["b", "a"]
    assert pairs[0][1]["v"] == 2


def test_pair_by_id_reports_offenders():
    with pytest.raises(PairingError) as err:
        pair_by_id([{"id": "x"}], [{"id": "y"}], "refs", "hyps")
    msg = str(err.value)
    assert "refs" in msg and "x" in msg and "y" in msg


def test_pair_by_id_duplicate_ids():
    with pytest.raises(PairingError):
        pair_by_id([{"id": "x"}, {"id": "x"}], [{"id": "x"}], "l", "r")


# --------------------------------------------------------- MLM accuracy


def _ex(rid, positions, originals):
    return {"id": rid, "mask_positions": positions, "originals": originals}


def _pred(rid, pairs):
    return {"id": rid, "predictions": [{"position": p, "id": i} for p, i in pairs]}


def test_mlm_accuracy_pooled_over_positions():
    examples = [_ex("a", [1, 3], [10, 11]), _ex("b", [0], [12])]
    predictions = [_pred("a", [(1, 10), (3, 99)]), _pred("b", [(0, 12)])]
    assert mlm_accuracy(predictions, examples) == pytest.approx(2 / 3)


def test_mlm_accuracy_position_mismatch():
    examples = [_ex("a", [1, 3], [10, 11])]
    predictions = [_pred("a", [(1, 10)])]
    with pytest.raises(PositionMismatch):
        mlm_accuracy(predictions, examples)
    predictions = [_pred("a", [(1, 10), (2, 11)])]
    with pytest.raises(PositionMismatch):
        mlm_accuracy(predictions, examples)


def test_mlm_accuracy_prediction_order_irrelevant():
    examples = [_ex("a", [1, 3], [10, 11])]
    predictions = [_pred("a", [(3, 11), (1, 10)])]
    assert mlm_accuracy(predictions, examples) == 1.0


# --------------------------------------------------------- eval reports


def test_evaluate_rouge_aggregate_is_mean():
    refs = [{"id": "1", "target": "the cat sat"}, {"id": "2", "target": "a dog"}]
    hyps = [{"id": "1", "text": "the cat"}, {"id": "2", "text": "a dog"}]
    report = evaluate_rouge(refs, hyps)
    assert report.kind == "rouge"
    assert len(report.rows) == 2
    f1s = [r["rouge_l_f1"] for r in report.rows]
    assert report.aggregate["rouge_l_f1"] == pytest.approx(sum(f1s) / 2)
    assert report.aggregate["records"] == 2


def test_evaluate_rouge_table_renders():
    refs = [{"id": "1", "target": "the cat sat"}]
    hyps = [{"id": "1", "text": "the cat"}]
    table = evaluate_rouge(refs, hyps).format_table()
    assert "rouge_l_f1" in table and "aggregate:" in table


def test_evaluate_perplexity_pools_tokens():
    records = [
        {"id": "1", "logprobs": [-1.0, -1.0]},
        {"id": "2", "logprobs": [-3.0]},
    ]
    report = evaluate_perplexity(records)
    # pooled: mean over all three tokens = 5/3 bits
    assert report.aggregate["mean_cross_entropy"] == pytest.approx(5 / 3)
    assert report.aggregate["perplexity"] == pytest.approx(2 ** (5 / 3))
    assert report.rows[0]["perplexity"] == 2.0
    assert report.rows[1]["perplexity"] == 8.0


def test_evaluate_perplexity_per_record_base():
    records = [{"id": "1", "logprobs": [math.log(0.25)], "base": "e"}]
    report = evaluate_perplexity(records)
    assert report.rows[0]["perplexity"] == pytest.approx(4.0, rel=1e-12)


def test_evaluate_mlm_accuracy_report():
    examples = [_ex("a", [1], [10]), _ex("b", [0, 2], [5, 6])]
    predictions = [_pred("a", [(1, 10)]), _pred("b", [(0, 5), (2, 0)])]
    report = evaluate_mlm_accuracy(predictions, examples)
    assert report.aggregate["accuracy"] == pytest.approx(2 / 3)
    assert report.aggregate["positions"] == 3
    by_id = {r["id"]: r for r in report.rows}
    assert by_id["a"]["accuracy"] == 1.0
    assert by_id["b"]["correct"] == 1
