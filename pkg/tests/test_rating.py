import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riskprop.graph import build_graph
from riskprop.propagation import PropagationConfig, iterate_until_convergence
from riskprop.rating import (
    classify, classify_top_percent, read_report, risk_from_reliability, risk_of,
    top_k, write_report,
)

from helpers import random_graph, recs, report_of


def test_risk_from_reliability():
    assert float(risk_from_reliability(0.1195)) == pytest.approx(8.805)
    assert float(risk_from_reliability(1.0)) == 0.0


def test_risk_of_merges_roles_and_defaults():
    g = build_graph(recs("a>b", "b>c", "a>c")).with_scores([0.2, 0.4, -0.1])
    s = iterate_until_convergence(g, PropagationConfig())
    rep = risk_of(s, g)
    assert rep.address.tolist() == ["a", "b", "c"]
    assert rep.is_default.tolist() == [False, False, True]
    assert rep.risk[2] == pytest.approx(3.0)
    assert rep.reliability[2] == 0.7
    assert np.isnan(rep.trustiness[0]) and not np.isnan(rep.trustiness[1])
    assert np.allclose(rep.risk[:2], (1 - s.R) * 10)
    # b is both payer and payee: risk comes from its payer role
    assert rep.reliability[1] == s.R[1]


def test_default_risk_follows_init_r():
    g = build_graph(recs("a>b")).with_scores([0.0])
    cfg = PropagationConfig(init_R=0.4)
    rep = risk_of(iterate_until_convergence(g, cfg), g, cfg)
    assert rep.risk[1] == pytest.approx(6.0)


def test_row_count_is_union_of_roles():
    g = random_graph(np.random.default_rng(5))
    rep = risk_of(iterate_until_convergence(g), g)
    assert len(rep) == len(set(g.payers.tolist()) | set(g.payees.tolist()))


def test_classify_threshold():
    rep = classify(report_of({"x": 8.805, "y": 0.474, "z": 6.0}), 6)
    assert rep.predictions() == {"x": True, "y": False, "z": True}


def test_classify_rejects_bad_threshold():
    with pytest.raises(ValueError):
        classify(report_of({"x": 1.0}), 11)


def test_unclassified_report_has_no_predictions():
    with pytest.raises(ValueError):
        report_of({"x": 1.0}).predictions()


@given(st.lists(st.floats(0, 10), min_size=1, max_size=20), st.floats(0, 10), st.floats(0, 10))
def test_classify_monotone_in_threshold(risks, r1, r2):
    lo, hi = sorted((r1, r2))
    rep = report_of({f"a{i:02d}": r for i, r in enumerate(risks)})
    p_lo, p_hi = classify(rep, lo).predicted, classify(rep, hi).predicted
    assert not np.any(p_hi & ~p_lo)


def test_top_k_examples():
    rep = report_of({"a": 9, "b": 5, "c": 9})
    assert top_k(rep, 2) == ["a", "c"]
    assert top_k(rep, 10) == ["a", "c", "b"]
    assert top_k(report_of({"a": 1, "b": 7}), 1) == ["b"]
    with pytest.raises(ValueError):
        top_k(rep, 0)


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=30, unique=True))
def test_risk_order_is_reliability_order(milli):
    rels = [m / 1000 for m in milli]
    rep = report_of({f"a{i:02d}": float(risk_from_reliability(r)) for i, r in enumerate(rels)})
    by_rel = [f"a{i:02d}" for i in np.argsort(rels, kind="stable")]
    assert top_k(rep, len(rels)) == by_rel


def test_top_percent_rounds_up():
    rep = classify_top_percent(report_of({f"a{i:03d}": i / 20 for i in range(150)}), 1.0)
    assert rep.predicted.sum() == 2
    assert set(a for a, p in rep.predictions().items() if p) == {"a149", "a148"}
    with pytest.raises(ValueError):
        classify_top_percent(rep, 0)


def test_report_roundtrip():
    g = build_graph(recs("a>b", "b>c", "a>c")).with_scores([0.2, 0.4, -0.1])
    rep = classify(risk_of(iterate_until_convergence(g), g), 6)
    buf = io.StringIO()
    write_report(rep, buf, {"seed": 0})
    text = buf.getvalue()
    lines = text.splitlines()
    assert lines[0] == "# seed=0"
    assert lines[1] == "address,reliability,trustiness,risk,is_default,predicted"
    row_c = next(r for r in lines[2:] if r.startswith("c,"))
    assert row_c.startswith("c,0.700000,") and row_c.endswith(",3.000000,1,licit")
    # sorted by risk descending
    risks = [float(r.split(",")[3]) for r in lines[2:]]
    assert risks == sorted(risks, reverse=True)
    row_a = next(r for r in lines[2:] if r.startswith("a,"))
    assert row_a.split(",")[2] == ""   # a never receives
    back = read_report(io.StringIO(text))
    assert back.address.tolist() == rep.address.tolist()
    assert np.allclose(back.risk, rep.risk, atol=1e-6)
    assert back.predicted.tolist() == rep.predicted.tolist()


def test_read_report_rejects_other_files():
    with pytest.raises(ValueError):
        read_report(io.StringIO("tx,from,to,value\n"))
