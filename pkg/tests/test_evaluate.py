import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from riskprop.evaluate import (
    ablation_ads, ablation_random_scores, auc, classification_metrics, format_table, mean_std,
    one_way_anova, precision_recall_at_k, repeat_over_seeds, score_groups, semi_supervised_run,
    stratified_split, threshold_sweep, write_curves, write_metrics,
)
from riskprop.graph import build_graph, build_graph_from_arrays, score_all_edges
from riskprop.ingest import LabelTable
from riskprop.propagation import PropagationConfig, iterate_until_convergence
from riskprop.rating import classify, risk_of, top_k
from riskprop.synth import planted_corpus

from helpers import random_graph, report_of
from oracles import anova_by_hand, auc_pairs

LABELS = LabelTable({"a": "phish-hack", "b": "phish-hack", "c": "exchange", "d": "licit-other"})


def test_perfect_predictions():
    m = classification_metrics({"a": True, "b": True, "c": False, "d": False}, LABELS)
    assert (m.illicit_precision, m.illicit_recall, m.illicit_f1, m.licit_f1, m.accuracy) == (1, 1, 1, 1, 1)


def test_all_predicted_licit():
    m = classification_metrics(dict.fromkeys("abcd", False), LABELS)
    assert m.illicit_recall == 0 and m.accuracy == 0.5
    assert m.illicit_precision == 0 and m.illicit_f1 == 0
    assert classification_metrics(dict.fromkeys("abcd", False), LABELS, zero_division=1.0).illicit_precision == 1.0


def test_tp_fp_fn_one_each():
    m = classification_metrics({"a": True, "b": False, "c": True, "d": False}, LABELS)
    assert (m.illicit_precision, m.illicit_recall, m.illicit_f1) == (0.5, 0.5, 0.5)
    assert m.n_labeled == 4


def test_unlabeled_ignored_and_empty_intersection():
    m = classification_metrics({"a": True, "z": True}, LABELS)
    assert m.n_labeled == 1
    with pytest.raises(ValueError):
        classification_metrics({"z": True}, LABELS)


def test_auc_examples():
    labels = LabelTable({"p1": "phish-hack", "p2": "phish-hack", "n": "exchange"})
    assert auc({"p1": 0.9, "p2": 0.3, "n": 0.8}, labels) == 0.5
    assert auc({"p1": 0.9, "p2": 0.8, "n": 0.1}, labels) == 1.0
    assert auc({"p1": 0.4, "p2": 0.4, "n": 0.4}, labels) == 0.5
    with pytest.raises(ValueError):
        auc({"p1": 1.0}, labels)


@settings(max_examples=100)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=15), st.lists(st.integers(0, 5), min_size=1, max_size=15))
def test_auc_matches_pairwise_oracle_and_is_transform_invariant(pos, neg):
    labels = LabelTable({**{f"p{i}": "phish-hack" for i in range(len(pos))},
                         **{f"n{i}": "exchange" for i in range(len(neg))}})
    scores = {**{f"p{i}": float(x) for i, x in enumerate(pos)}, **{f"n{i}": float(x) for i, x in enumerate(neg)}}
    a = auc(scores, labels)
    assert a == pytest.approx(auc_pairs(pos, neg), abs=1e-12)
    assert auc({k: np.exp(v) * 3 - 7 for k, v in scores.items()}, labels) == pytest.approx(a, abs=1e-12)


def test_precision_recall_at_k_examples():
    labels = LabelTable({"a": "phish-hack", "b": "exchange", "c": "phish-hack"})
    assert precision_recall_at_k(["a", "b", "c"], labels, [2]) == [(2, 0.5, 0.5)]
    assert precision_recall_at_k(["a", "b", "c"], labels, [10])[0][1:] == precision_recall_at_k(["a", "b", "c"], labels, [3])[0][1:]
    assert precision_recall_at_k(["a", "c", "b"], labels, [2]) == [(2, 1.0, 1.0)]
    with pytest.raises(ValueError):
        precision_recall_at_k(["a"], labels, [0])


def test_precision_at_k_skips_unlabeled_unless_strict():
    labels = LabelTable({"a": "phish-hack", "c": "phish-hack"})
    ranked = ["a", "u", "c", "v"]
    assert precision_recall_at_k(ranked, labels, [2]) == [(2, 1.0, 1.0)]
    assert precision_recall_at_k(ranked, labels, [2], strict=True) == [(2, 0.5, 0.5)]


@given(st.lists(st.booleans(), min_size=1, max_size=30))
def test_recall_at_k_non_decreasing(flags):
    labels = LabelTable({f"a{i:02d}": "phish-hack" if f else "exchange" for i, f in enumerate(flags)})
    ranked = sorted(labels.entries)
    rows = precision_recall_at_k(ranked, labels, range(1, len(flags) + 3))
    recalls = [r for _, _, r in rows]
    assert recalls == sorted(recalls)
    for k, p, _ in rows:
        top = ranked[:k]
        assert p == pytest.approx(sum(labels.is_illicit(a) for a in top) / len(top))


def test_anova_example():
    r = one_way_anova([1, 2, 3], [2, 3, 4])
    assert (r.ms_between, r.ms_within, r.f_statistic) == pytest.approx((1.5, 1.0, 1.5))
    assert (r.df_between, r.df_within) == (1, 4)
    ref = stats.f_oneway([1, 2, 3], [2, 3, 4])
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-12)
    assert r.p_value == pytest.approx(0.288, abs=1e-3)


def test_anova_identical_groups():
    r = one_way_anova([1, 2, 3], [1, 2, 3])
    assert r.f_statistic == 0 and r.p_value == 1.0


def test_anova_degenerate_cases():
    with pytest.raises(ValueError):
        one_way_anova([2, 2], [2, 2])
    r = one_way_anova([1, 1], [3, 3])
    assert r.f_statistic == np.inf and r.p_value == 0.0
    with pytest.raises(ValueError):
        one_way_anova([1], [2, 3])


def test_anova_p_underflow_reported_as_zero():
    rng = np.random.default_rng(0)
    r = one_way_anova(rng.normal(0, 1, 5000), rng.normal(10, 1, 5000))
    assert r.p_value == 0.0


@settings(max_examples=100)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20), st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_anova_identities(a, b):
    ssb, ssw, sst = anova_by_hand(a, b)
    if ssb == 0 and ssw == 0:
        return
    try:
        r = one_way_anova(a, b)
    except ValueError:
        return
    assert r.ss_between + r.ss_within == pytest.approx(sst, rel=1e-9, abs=1e-9)
    assert r.ss_between == pytest.approx(ssb, rel=1e-9, abs=1e-9)
    assert r.f_statistic >= 0
    assert 0.0 <= r.p_value <= 1.0
    ref = stats.f_oneway(a, b).pvalue if r.ms_within > 1e-9 else np.nan
    if np.isfinite(ref) and np.isfinite(r.f_statistic):
        assert r.p_value == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_score_groups_expand_multiplicity():
    # canonical edge order: e>y, h>x (x2), u>y
    g = build_graph_from_arrays(["h", "h", "e", "u"], ["x", "x", "y", "y"]).with_scores([0.5, -0.5, 0.2])
    ill, lic = score_groups(g, LabelTable({"h": "phish-hack", "e": "exchange"}))
    assert ill.tolist() == [-0.5, -0.5]
    assert lic.tolist() == [0.5]


def test_ablation_ads_examples():
    g = build_graph_from_arrays(["a", "a", "b", "c", "c"], ["x", "y", "x", "x", "y"]).with_scores([-0.2, 0.1, 1.0, -0.3, 0.3])
    ads = ablation_ads(g)
    assert ads["a"][0] == pytest.approx(-0.05) and ads["a"][1]
    assert ads["b"] == (1.0, False)
    assert ads["c"][0] == pytest.approx(0.0, abs=1e-15)
    g0 = build_graph_from_arrays(["c", "c"], ["x", "y"]).with_scores([-0.25, 0.25])
    assert ablation_ads(g0)["c"] == (0.0, True)
    assert "x" not in ads and "y" not in ads


def test_ablation_ads_weights_multiplicity():
    g = build_graph_from_arrays(["a", "a", "a"], ["x", "x", "y"]).with_scores([0.3, -0.9])
    assert ablation_ads(g)["a"][0] == pytest.approx((0.6 - 0.9) / 3)


def test_random_scores_deterministic_and_centered():
    g = random_graph(np.random.default_rng(0), n_nodes=50, n_txn=300)
    a = ablation_random_scores(g, 3)
    b = ablation_random_scores(g, 3)
    c = ablation_random_scores(g, 4)
    assert a.score.tobytes() == b.score.tobytes()
    assert not np.array_equal(a.score, c.score)
    assert np.all(np.abs(a.score) <= 1)
    big = build_graph_from_arrays(np.arange(100_000), np.arange(100_000)).with_scores(np.zeros(100_000))
    assert abs(ablation_random_scores(big, 0).score.mean()) < 0.01


def test_threshold_sweep_extremes():
    rep = report_of({"a": 8.0, "b": 7.0, "c": 2.0, "d": 5.0})
    rows = threshold_sweep(rep, LABELS, [0, 10])
    assert rows[0][1].illicit_recall == 1.0
    assert rows[1][1].illicit_recall == 0.0
    assert rows[1][1].illicit_precision == 1.0   # nothing predicted
    assert rows[0][1].auc == rows[1][1].auc == 1.0


def test_stratified_split():
    labels = LabelTable({**{f"i{k}": "phish-hack" for k in range(10)}, **{f"l{k}": "exchange" for k in range(40)}})
    train, test = stratified_split(labels, 0.8, seed=1)
    assert train.isdisjoint(test) and train | test == set(labels.entries)
    assert len(train & labels.illicit()) == 8 and len(train & labels.licit()) == 32
    assert stratified_split(labels, 0.8, seed=1) == (train, test)
    assert stratified_split(labels, 0.8, seed=2) != (train, test)
    with pytest.raises(ValueError):
        stratified_split(labels, 1.0)


def test_mean_std_and_repeat():
    assert mean_std([{"x": 1.0, "y": None}, {"x": 3.0, "y": None}]) == {"x": (2.0, 1.0)}
    out = repeat_over_seeds(lambda s: classification_metrics({"a": bool(s), "c": False}, LABELS), [0, 1])
    assert out["accuracy"] == (0.75, 0.25)


def test_semi_supervised_run_on_planted_corpus():
    records, labels = planted_corpus(seed=0)
    g = score_all_edges(build_graph(records))
    m = semi_supervised_run(g, labels, PropagationConfig(), seed=0)
    assert 0 <= m.accuracy <= 1 and m.n_labeled >= 1


def test_planted_ranking_and_sweep_end_to_end():
    records, labels = planted_corpus(seed=1)
    g = score_all_edges(build_graph(records))
    rep = risk_of(iterate_until_convergence(g), g)
    cores = labels.illicit()
    rows = precision_recall_at_k(top_k(rep, len(rep)), labels, range(1, len(cores) + 1))
    assert all(p == 1.0 for _, p, _ in rows)
    m = classification_metrics(classify(rep, 6).predictions(), labels)
    assert m.illicit_precision == 1.0


def test_writers():
    m = classification_metrics({"a": True, "b": True, "c": False, "d": False}, LABELS)
    buf = io.StringIO()
    write_metrics(m, buf)
    assert "illicit_f1,1.0" in buf.getvalue() and "auc,\n" in buf.getvalue()
    table = format_table([("rth=6", m)])
    assert "illicit_P" in table and "rth=6" in table
    buf = io.StringIO()
    write_curves([(1, 1.0, 0.5)], buf)
    assert buf.getvalue() == "k,precision,recall\n1,1.000000,0.500000\n"
