"""Directed bipartite payer/payee graph and the de-anonymous edge score.

Every account that sends becomes a payer node, every account that receives a
payee node; an account doing both has one node on each side. Parallel
transactions between the same pair collapse into one edge carrying a
multiplicity, so ``out_count``/``in_count`` are transaction counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import IO, Sequence

import numpy as np

from .ingest import TransactionRecord


@dataclass(frozen=True, eq=False)
class PayerPayeeGraph:
    payers: np.ndarray          # sorted unique payer addresses
    payees: np.ndarray          # sorted unique payee addresses
    edge_payer: np.ndarray      # int64 index into payers; edges sorted by (payer, payee)
    edge_payee: np.ndarray      # int64 index into payees
    multiplicity: np.ndarray    # int64 transaction count per edge
    out_count: np.ndarray       # per payer
    in_count: np.ndarray        # per payee
    max_out: int
    max_in: int
    score: np.ndarray | None = None
    max_score: float | None = None
    max_abs_score: float | None = None
    saturated: bool = False     # some |score| == 1; contraction guarantee void

    @property
    def n_edges(self) -> int:
        return len(self.edge_payer)

    @property
    def n_transactions(self) -> int:
        return int(self.multiplicity.sum())

    @cached_property
    def by_payee(self) -> np.ndarray:
        """Edge permutation grouping edges by payee, payers ascending within a group."""
        return np.argsort(self.edge_payee, kind="stable")

    @cached_property
    def payee_sorted(self) -> np.ndarray:
        return self.edge_payee[self.by_payee]

    @cached_property
    def weighted_score(self) -> np.ndarray:
        """multiplicity * score per edge."""
        return self.multiplicity * self.score

    @cached_property
    def weight(self) -> np.ndarray:
        return self.multiplicity.astype(np.float64)

    def accounts(self) -> np.ndarray:
        return np.union1d(self.payers, self.payees)

    def edges(self):
        """Yield ``(payer, payee, multiplicity, score)`` tuples in canonical order."""
        for i in range(self.n_edges):
            s = None if self.score is None else float(self.score[i])
            yield (str(self.payers[self.edge_payer[i]]), str(self.payees[self.edge_payee[i]]),
                   int(self.multiplicity[i]), s)

    def with_scores(self, scores) -> "PayerPayeeGraph":
        """Return a copy carrying the given per-edge scores (used for ablations and tests)."""
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (self.n_edges,):
            raise ValueError(f"expected {self.n_edges} scores, got shape {scores.shape}")
        if np.any(np.abs(scores) > 1):
            raise ValueError("scores must lie in [-1, 1]")
        mabs = float(np.abs(scores).max())
        return replace(self, score=scores, max_score=float(scores.max()),
                       max_abs_score=mabs, saturated=mabs >= 1.0)


def build_graph_from_arrays(payer_addr, payee_addr) -> PayerPayeeGraph:
    """Build the graph from two parallel sequences of endpoint addresses."""
    payer_addr = np.asarray(payer_addr)
    payee_addr = np.asarray(payee_addr)
    if payer_addr.size == 0:
        raise ValueError("cannot build a graph from zero transactions")
    if payer_addr.shape != payee_addr.shape:
        raise ValueError("payer and payee arrays differ in length")
    payers, pi = np.unique(payer_addr, return_inverse=True)
    payees, vi = np.unique(payee_addr, return_inverse=True)
    key = pi.astype(np.int64) * len(payees) + vi
    ukey, mult = np.unique(key, return_counts=True)
    edge_payer = ukey // len(payees)
    edge_payee = ukey % len(payees)
    out_count = np.bincount(edge_payer, weights=mult, minlength=len(payers)).astype(np.int64)
    in_count = np.bincount(edge_payee, weights=mult, minlength=len(payees)).astype(np.int64)
    return PayerPayeeGraph(
        payers=payers, payees=payees,
        edge_payer=edge_payer, edge_payee=edge_payee, multiplicity=mult.astype(np.int64),
        out_count=out_count, in_count=in_count,
        max_out=int(out_count.max()), max_in=int(in_count.max()),
    )


def build_graph(records: Sequence[TransactionRecord]) -> PayerPayeeGraph:
    if not records:
        raise ValueError("cannot build a graph from zero transactions")
    return build_graph_from_arrays([r.payer for r in records], [r.payee for r in records])


def deanonymous_score(out_count: int, in_count: int, max_out: int, max_in: int) -> float:
    """Score one transaction from the payer's and payee's activity.

    Each side contributes ``2*log(count)/log(max) - 1``, a value in [-1, 1];
    the score is the mean of both. A side whose max is 1 contributes 0.

    >>> deanonymous_score(10, 10, 100, 100)
    0.0
    """
    for name, c, m in (("out_count", out_count, max_out), ("in_count", in_count, max_in)):
        if m < 1 or not 1 <= c <= m:
            raise ValueError(f"{name}={c} outside [1, {m}]")
    return 0.5 * (_side(out_count, max_out) + _side(in_count, max_in))


def _side(count: int, cmax: int) -> float:
    if cmax == 1:
        return 0.0
    lm = math.log(cmax)
    return (2.0 * math.log(count) - lm) / lm


def _side_vec(count: np.ndarray, cmax: int) -> np.ndarray:
    if cmax == 1:
        return np.zeros(len(count))
    lm = math.log(cmax)
    return (2.0 * np.log(count) - lm) / lm


def score_all_edges(graph: PayerPayeeGraph) -> PayerPayeeGraph:
    s = 0.5 * (_side_vec(graph.out_count[graph.edge_payer], graph.max_out)
               + _side_vec(graph.in_count[graph.edge_payee], graph.max_in))
    np.clip(s, -1.0, 1.0, out=s)  # only trims last-ulp log rounding
    return graph.with_scores(s)


def write_graph(graph: PayerPayeeGraph, fh: IO[str]) -> None:
    """Dump ``payer,payee,multiplicity,score`` lines, scores round-trip exact."""
    fh.write("payer,payee,multiplicity,score\n")
    for payer, payee, m, s in graph.edges():
        fh.write(f"{payer},{payee},{m},{'' if s is None else format(s, '.17g')}\n")
