import math

import numpy as np
import pytest

from ltrlab.io import Qrels
from ltrlab.metrics import binary_metrics, delta_pct, delta_report, evaluate, ndcg_at, recall_at

from conftest import make_run


# --- brute-force oracles -----------------------------------------------------

def brute_recall(ranking, relevant, k):
    if not relevant:
        return None
    return len([v for v in ranking[:k] if v in relevant]) / len(relevant)


def brute_ndcg(ranking, grades, k):
    """Definitional nDCG: gain 2^rel - 1, discount log2(i + 1), IDCG at k."""
    dcg = 0.0
    for i, vid in enumerate(ranking[:k]):
        dcg += (2 ** grades.get(vid, 0) - 1) / math.log2(i + 2)
    ideal = sorted((g for g in grades.values() if g > 0), reverse=True)
    idcg = sum((2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
    return dcg / idcg if idcg > 0 else None


def random_instance(rng, n_docs=8, graded=False):
    vids = [f"v{i}" for i in range(n_docs)]
    ranking = list(rng.permutation(vids))
    high = 4 if graded else 2
    grades = {v: int(rng.integers(0, high)) for v in vids if rng.random() < 0.6}
    return ranking, grades


# --- recall ------------------------------------------------------------------

def test_recall_all_relevant_in_topk():
    run = make_run({"q1": [("a", 3.0), ("b", 2.0), ("c", 1.0)]})
    qrels = Qrels({("q1", "a"): 1, ("q1", "b"): 1})
    per, mean, _ = recall_at(run, qrels, 2)
    assert per["q1"] == 1.0 and mean == 1.0


def test_recall_half():
    run = make_run({"q1": [("a", 3.0), ("b", 2.0), ("c", 1.0)]})
    qrels = Qrels({("q1", "a"): 1, ("q1", "c"): 1})
    per, _, _ = recall_at(run, qrels, 1)
    assert per["q1"] == 0.5


def test_recall_skips_queries_without_relevant():
    run = make_run({"q1": [("a", 1.0)], "q2": [("b", 1.0)]})
    qrels = Qrels({("q1", "a"): 1, ("q2", "b"): 0})
    per, mean, skipped = recall_at(run, qrels, 1)
    assert "q2" not in per and skipped == 1 and mean == 1.0


def test_recall_matches_brute_force_randomized():
    rng = np.random.default_rng(0)
    for _ in range(100):
        ranking, grades = random_instance(rng)
        run = make_run({"q": [(v, float(len(ranking) - i)) for i, v in enumerate(ranking)]})
        qrels = Qrels({("q", v): g for v, g in grades.items()})
        relevant = {v for v, g in grades.items() if g > 0}
        for k in (1, 3, 10):
            per, _, _ = recall_at(run, qrels, k)
            expected = brute_recall(ranking, relevant, k)
            if expected is None:
                assert "q" not in per
            else:
                assert per["q"] == expected


# --- ndcg ----------------------------------------------------------------------

def test_ndcg_ideal_ordering_is_one():
    run = make_run({"q1": [("a", 3.0), ("b", 2.0), ("c", 1.0)]})
    qrels = Qrels({("q1", "a"): 2, ("q1", "b"): 1})
    per, _, _ = ndcg_at(run, qrels, 3)
    assert per["q1"] == pytest.approx(1.0, abs=1e-15)


def test_ndcg_hand_value():
    # binary rels, ranking [rel, non, rel], 2 relevant, k = 3
    run = make_run({"q1": [("a", 3.0), ("x", 2.0), ("b", 1.0)]})
    qrels = Qrels({("q1", "a"): 1, ("q1", "b"): 1})
    per, _, _ = ndcg_at(run, qrels, 3)
    dcg = 1.0 + 0.0 + 1.0 / math.log2(4)
    idcg = 1.0 + 1.0 / math.log2(3)
    assert per["q1"] == pytest.approx(dcg / idcg, abs=1e-15)
    assert per["q1"] == pytest.approx(0.919721, abs=1e-6)


def test_ndcg_equal_grade_permutation_invariant():
    qrels = Qrels({("q1", "a"): 1, ("q1", "b"): 1, ("q1", "x"): 0})
    a = make_run({"q1": [("a", 3.0), ("b", 2.0), ("x", 1.0)]})
    b = make_run({"q1": [("b", 3.0), ("a", 2.0), ("x", 1.0)]})
    pa, _, _ = ndcg_at(a, qrels, 3)
    pb, _, _ = ndcg_at(b, qrels, 3)
    assert pa["q1"] == pb["q1"]


def test_ndcg_matches_brute_force_randomized_graded():
    rng = np.random.default_rng(1)
    for _ in range(100):
        ranking, grades = random_instance(rng, graded=True)
        run = make_run({"q": [(v, float(len(ranking) - i)) for i, v in enumerate(ranking)]})
        qrels = Qrels({("q", v): g for v, g in grades.items()})
        for k in (1, 3, 8):
            per, _, _ = ndcg_at(run, qrels, k)
            expected = brute_ndcg(ranking, grades, k)
            if expected is None:
                assert "q" not in per
            else:
                assert per["q"] == pytest.approx(expected, abs=1e-12)


def test_ndcg_monotone_in_k_beyond_relevant_count():
    rng = np.random.default_rng(2)
    for _ in range(20):
        ranking, grades = random_instance(rng)
        n_rel = sum(1 for g in grades.values() if g > 0)
        if n_rel == 0:
            continue
        run = make_run({"q": [(v, float(len(ranking) - i)) for i, v in enumerate(ranking)]})
        qrels = Qrels({("q", v): g for v, g in grades.items()})
        values = [ndcg_at(run, qrels, k)[0]["q"] for k in range(n_rel, len(ranking) + 1)]
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))


def test_rank_preserving_score_transform_invariance():
    qrels = Qrels({("q1", "a"): 1, ("q1", "b"): 1})
    raw = make_run({"q1": [("a", 3.0), ("x", 2.0), ("b", 1.0)]})
    squashed = make_run({"q1": [("a", 0.3), ("x", 0.2), ("b", 0.1)]})
    assert ndcg_at(raw, qrels, 3) == ndcg_at(squashed, qrels, 3)
    assert recall_at(raw, qrels, 2) == recall_at(squashed, qrels, 2)


def test_equal_topk_sets_imply_equal_recall():
    # reordering within the head cannot change recall at the head size
    qrels = Qrels({("q1", "a"): 1, ("q1", "b"): 1})
    before = make_run({"q1": [("a", 4.0), ("x", 3.0), ("b", 2.0), ("y", 1.0)]})
    after = make_run({"q1": [("b", 4.0), ("a", 3.0), ("x", 2.0), ("y", 1.0)]})
    k = 3
    assert {e.video_id for e in before.by_query()["q1"][:k]} == \
           {e.video_id for e in after.by_query()["q1"][:k]}
    assert recall_at(before, qrels, k)[1] == recall_at(after, qrels, k)[1]


# --- deltas --------------------------------------------------------------------

def test_delta_pct_published_values():
    assert delta_pct(0.523, 0.570) == pytest.approx(8.99, abs=0.01)
    assert delta_pct(0.495, 0.543) == pytest.approx(9.70, abs=0.01)
    assert delta_pct(0.523, 0.508) == pytest.approx(-2.87, abs=0.01)


def test_delta_pct_zero_baseline_absent():
    assert delta_pct(0.0, 0.5) is None
    assert delta_pct(-1.0, 0.5) is None


def test_delta_report_self_is_zero():
    run = make_run({"q1": [("a", 2.0), ("b", 1.0)]})
    qrels = Qrels({("q1", "a"): 1})
    rep = evaluate(run, qrels, [1, 2])
    delta = delta_report(rep, rep)
    assert all(v == 0.0 for v in delta.recall_delta_pct.values())
    assert all(v == 0.0 for v in delta.ndcg_delta_pct.values())


# --- binary metrics --------------------------------------------------------------

def test_binary_all_correct():
    qrels = Qrels({("q", "a"): 1, ("q", "b"): 0})
    result = binary_metrics([("q", "a", 1), ("q", "b", 0)], qrels)
    assert result["accuracy"] == 1.0


def test_binary_all_yes_low_precision():
    qrels = Qrels({("q", f"v{i}"): (1 if i == 0 else 0) for i in range(10)})
    result = binary_metrics([("q", f"v{i}", 1) for i in range(10)], qrels)
    assert result["precision"] == pytest.approx(0.1)
    assert result["recall"] == 1.0


def test_binary_hand_tallied_confusion():
    qrels = Qrels({("q", "a"): 1, ("q", "b"): 1, ("q", "c"): 0,
                   ("q", "d"): 0, ("q", "e"): 0, ("q", "f"): 1})
    preds = [("q", "a", 1), ("q", "b", 0), ("q", "c", 1),
             ("q", "d", 0), ("q", "e", 0), ("q", "f", 1)]
    result = binary_metrics(preds, qrels)
    assert result["confusion"] == {"tp": 2, "fp": 1, "tn": 2, "fn": 1}
    assert result["accuracy"] == pytest.approx(4 / 6)
    assert result["precision"] == pytest.approx(2 / 3)
    assert result["recall"] == pytest.approx(2 / 3)


def test_binary_missing_qrels_entry():
    with pytest.raises(KeyError):
        binary_metrics([("q", "zz", 1)], Qrels({}))


def test_binary_zero_denominator_absent():
    qrels = Qrels({("q", "a"): 0})
    result = binary_metrics([("q", "a", 0)], qrels)
    assert result["precision"] is None and result["recall"] is None
