"""Small graph builders shared by the tests."""
from __future__ import annotations

import numpy as np

from riskprop.graph import build_graph_from_arrays, score_all_edges
from riskprop.ingest import TransactionRecord
from riskprop.rating import RiskReport


def recs(*pairs, value=1):
    """Records from ``"a>b"`` strings or (payer, payee) tuples."""
    out = []
    for i, p in enumerate(pairs):
        u, v = p.split(">") if isinstance(p, str) else p
        out.append(TransactionRecord(f"t{i}", u, v, value))
    return out


def single_edge(score):
    g = build_graph_from_arrays(["a"], ["b"])
    return g.with_scores([score])


def random_graph(rng, n_nodes=60, n_txn=200):
    """Scored random multigraph over ``n_nodes`` accounts."""
    u = rng.integers(0, n_nodes, n_txn)
    v = rng.integers(0, n_nodes, n_txn)
    return score_all_edges(build_graph_from_arrays([f"n{x:03d}" for x in u], [f"n{x:03d}" for x in v]))



def report_of(risks: dict) -> RiskReport:
    """Unclassified report from an address -> risk map."""
    addr = sorted(risks)
    risk = np.array([risks[a] for a in addr], dtype=float)
    return RiskReport(address=np.array(addr), reliability=1 - risk / 10, trustiness=np.full(len(addr), np.nan),
                      risk=risk, is_default=np.zeros(len(addr), dtype=bool))
