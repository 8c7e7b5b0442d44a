"""Fixed-point propagation of Trustiness, Reliability and Confidence.

One iteration reads the previous edge confidences to refresh payee
trustiness ``T`` and payer reliability ``R``, then recomputes every edge
confidence from the *new* ``T`` and ``R``::

    T(v)      = sum_in  m * score * conf / in_count(v)
    R(u)      = sum_out m * conf         / out_count(u)
    conf(u,v) = clip((R(u) + 1 - |score(u,v) - T(v)|) / 2, 0, 1)

With ``max|score| = M < 1`` the map is a contraction with factor
``(1 + M) / 2``, so the iteration converges to a unique state.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Mapping

import numpy as np

from .graph import PayerPayeeGraph
from .ingest import CATEGORIES, ILLICIT, LabelTable

log = logging.getLogger(__name__)

UNSUPERVISED = "unsupervised"
SEMI_SUPERVISED = "semi-supervised"

DEFAULT_LABEL_INIT = {
    "ico-wallet": 0.9,
    "converter": 0.9,
    "mining": 0.9,
    "exchange": 0.7,
    "gambling": 0.4,
    "phish-hack": 0.0,
}


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropagationConfig:
    init_T: float = 0.5
    init_R: float = 0.7
    init_Conf: float = 0.5
    epsilon: float = 0.01
    max_iterations: int = 1000
    mode: str = UNSUPERVISED
    label_init: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_LABEL_INIT))
    clamp_illicit: bool = True
    normalized_delta: bool = False
    threads: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not -1.0 <= self.init_T <= 1.0:
            raise ValueError(f"init_T={self.init_T} outside [-1, 1]")
        for name in ("init_R", "init_Conf"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.mode not in (UNSUPERVISED, SEMI_SUPERVISED):
            raise ValueError(f"unknown mode {self.mode!r}")
        for cat, v in self.label_init.items():
            if cat not in CATEGORIES:
                raise ValueError(f"unknown category {cat!r} in label_init")
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"label_init[{cat}]={v} outside [0, 1]")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "label_init"}
        d["label_init"] = ";".join(f"{k}={v}" for k, v in sorted(self.label_init.items()))
        return d


@dataclass
class PropagationState:
    T: np.ndarray                 # per payee
    R: np.ndarray                 # per payer
    conf: np.ndarray              # per edge
    pinned: np.ndarray            # per payer; True keeps R at 0 (labeled illicit training payer)
    t: int = 0
    trace: list = field(default_factory=list)   # (dT, dR, dC, delta) per iteration
    clamp_count: int = 0          # edge updates where raw confidence left [0, 1]
    converged: bool = False
    reason: str = ""
    alpha: float | None = None

    def copy(self) -> "PropagationState":
        return replace(self, T=self.T.copy(), R=self.R.copy(), conf=self.conf.copy(),
                       trace=list(self.trace))


def initialize(graph: PayerPayeeGraph, config: PropagationConfig,
               labels: LabelTable | None = None,
               training_set: Iterable[str] | None = None) -> PropagationState:
    """Build the iteration-0 state.

    In semi-supervised mode, training payers that carry a label start from
    the category's ``label_init`` value; every other payer starts from
    ``init_R``.
    """
    R = np.full(len(graph.payers), config.init_R)
    pinned = np.zeros(len(graph.payers), dtype=bool)
    if config.mode == SEMI_SUPERVISED:
        if labels is None or training_set is None:
            raise ValueError("semi-supervised mode needs both labels and a training set")
        index = {a: i for i, a in enumerate(graph.payers.tolist())}
        for addr in sorted(set(training_set)):
            cat = labels.get(addr)
            i = index.get(addr)
            if cat is None or i is None:
                continue
            R[i] = config.label_init.get(cat, config.init_R)
            if cat == ILLICIT and config.clamp_illicit:
                pinned[i] = True
                R[i] = 0.0
    alpha = None if graph.max_abs_score is None else (1.0 + graph.max_abs_score) / 2.0
    return PropagationState(
        T=np.full(len(graph.payees), config.init_T),
        R=R,
        conf=np.full(graph.n_edges, config.init_Conf),
        pinned=pinned,
        alpha=alpha,
    )


def _chunks(owner: np.ndarray, n_nodes: int, threads: int):
    """Split a node-sorted edge array into contiguous pieces on node boundaries."""
    node_cuts = np.linspace(0, n_nodes, threads + 1).astype(np.int64)
    edge_cuts = np.searchsorted(owner, node_cuts, side="left")
    return [(int(edge_cuts[i]), int(edge_cuts[i + 1]), int(node_cuts[i]), int(node_cuts[i + 1]))
            for i in range(threads)]


def _segment_sum(values: np.ndarray, owner: np.ndarray, n_nodes: int, threads: int = 1) -> np.ndarray:
    """Per-node sum of edge values; ``owner`` must be sorted when ``threads > 1``."""
    # bincount accumulates sequentially in edge order and chunks never split a
    # node, so every node sees the same addition order for any thread count
    if threads <= 1 or n_nodes < 2 * threads:
        return np.bincount(owner, weights=values, minlength=n_nodes)
    out = np.zeros(n_nodes)

    def run(piece):
        e0, e1, n0, n1 = piece
        out[n0:n1] = np.bincount(owner[e0:e1] - n0, weights=values[e0:e1], minlength=n1 - n0)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run, _chunks(owner, n_nodes, threads)))
    return out


def update_trustiness(state: PropagationState, graph: PayerPayeeGraph, threads: int = 1) -> np.ndarray:
    contrib = graph.weighted_score * state.conf
    if threads <= 1:
        # canonical edge order already visits each payee's edges by ascending payer
        total = _segment_sum(contrib, graph.edge_payee, len(graph.payees))
    else:
        total = _segment_sum(contrib[graph.by_payee], graph.payee_sorted, len(graph.payees), threads)
    return total / graph.in_count


def update_reliability(state: PropagationState, graph: PayerPayeeGraph, threads: int = 1) -> np.ndarray:
    R = _segment_sum(graph.weight * state.conf, graph.edge_payer, len(graph.payers), threads)
    R /= graph.out_count
    R[state.pinned] = 0.0
    return R


def raw_confidence(R: np.ndarray, T: np.ndarray, graph: PayerPayeeGraph) -> np.ndarray:
    """Unclamped ``(R(u) + 1 - |score - T(v)|) / 2`` per edge."""
    dist = T[graph.edge_payee]
    np.subtract(graph.score, dist, out=dist)
    np.abs(dist, out=dist)
    out = R[graph.edge_payer]
    out += 1.0
    out -= dist
    out *= 0.5
    return out


def update_confidence(state: PropagationState, graph: PayerPayeeGraph) -> np.ndarray:
    """Edge confidence from the state's (already refreshed) ``R`` and ``T``."""
    return np.clip(raw_confidence(state.R, state.T, graph), 0.0, 1.0)


def compute_delta(prev: PropagationState, curr: PropagationState,
                  graph: PayerPayeeGraph | None = None, normalized: bool = False):
    """Summed absolute change of T, R and conf between two states, and their max.

    Edge changes are weighted by multiplicity when ``graph`` is given.
    """
    for name in ("T", "R", "conf"):
        if getattr(prev, name).shape != getattr(curr, name).shape:
            raise ValueError(f"states disagree on the size of {name}; different graphs?")
    dT = np.abs(curr.T - prev.T)
    dR = np.abs(curr.R - prev.R)
    dC = np.subtract(curr.conf, prev.conf)
    np.abs(dC, out=dC)
    sums = [float(dT.sum()), float(dR.sum()),
            float(dC.sum() if graph is None else np.dot(dC, graph.weight))]
    if normalized:
        sizes = (len(dT), len(dR), float(graph.multiplicity.sum()) if graph is not None else len(dC))
        sums = [s / n if n else 0.0 for s, n in zip(sums, sizes)]
    return sums[0], sums[1], sums[2], max(sums)


def step(state: PropagationState, graph: PayerPayeeGraph, threads: int = 1) -> PropagationState:
    """Run one synchronous iteration; the trace is left to the caller."""
    T = update_trustiness(state, graph, threads)
    R = update_reliability(state, graph, threads)
    raw = raw_confidence(R, T, graph)
    # raw <= 1 always holds since R <= 1; only the lower bound can bind
    clamps = int(np.count_nonzero(raw < 0.0))
    conf = np.maximum(raw, 0.0)
    return replace(state, T=T, R=R, conf=conf, t=state.t + 1,
                   clamp_count=state.clamp_count + clamps, trace=state.trace)


def iterate_until_convergence(graph: PayerPayeeGraph, config: PropagationConfig | None = None,
                              labels: LabelTable | None = None,
                              training_set: Iterable[str] | None = None,
                              state: PropagationState | None = None) -> PropagationState:
    """Iterate from the initial state until the max summed change drops below epsilon.

    Stops early at ``config.max_iterations``; ``state.converged`` and
    ``state.reason`` say which happened. Pass ``state`` to resume or to start
    from a custom initialization.
    """
    config = config or PropagationConfig()
    if graph.score is None:
        raise ValueError("graph has no edge scores; call score_all_edges first")
    if graph.saturated:
        log.warning("some edge has |score| = 1; convergence to a unique point is not guaranteed")
    if state is None:
        state = initialize(graph, config, labels, training_set)
    state = state.copy()
    while state.t < config.max_iterations:
        new = step(state, graph, config.threads)
        delta = compute_delta(state, new, graph, config.normalized_delta)
        # any nan/inf in the new state surfaces in the summed changes
        if not all(np.isfinite(delta)):
            raise PropagationError(f"non-finite value at iteration {new.t}")
        new.trace.append(delta)
        state = new
        if delta[3] < config.epsilon:
            state.converged = True
            state.reason = f"delta {delta[3]:.3g} < epsilon {config.epsilon:g}"
            return state
    state.reason = f"stopped at max_iterations={config.max_iterations}"
    return state


def write_trace(state: PropagationState, fh: IO[str]) -> None:
    if state.alpha is not None:
        fh.write(f"# alpha={state.alpha!r}\n")
    fh.write("t,delta_T,delta_R,delta_C,delta\n")
    for t, row in enumerate(state.trace, start=1):
        fh.write(f"{t}," + ",".join(format(x, ".17g") for x in row) + "\n")


def write_checkpoint(state: PropagationState, graph: PayerPayeeGraph, fh: IO[str]) -> None:
    """Dump ``kind,key,value`` lines; edge keys are ``payer>payee``."""
    for a, v in zip(graph.payers.tolist(), state.R.tolist()):
        fh.write(f"payer,{a},{v!r}\n")
    for a, v in zip(graph.payees.tolist(), state.T.tolist()):
        fh.write(f"payee,{a},{v!r}\n")
    for i, v in enumerate(state.conf.tolist()):
        fh.write(f"edge,{graph.payers[graph.edge_payer[i]]}>{graph.payees[graph.edge_payee[i]]},{v!r}\n")


def read_checkpoint(fh: IO[str], graph: PayerPayeeGraph) -> PropagationState:
    payer_ix = {a: i for i, a in enumerate(graph.payers.tolist())}
    payee_ix = {a: i for i, a in enumerate(graph.payees.tolist())}
    edge_ix = {(int(u), int(v)): i for i, (u, v) in enumerate(zip(graph.edge_payer, graph.edge_payee))}
    state = PropagationState(T=np.zeros(len(payee_ix)), R=np.zeros(len(payer_ix)),
                             conf=np.zeros(graph.n_edges), pinned=np.zeros(len(payer_ix), dtype=bool))
    for line in fh:
        kind, key, value = line.rstrip("\n").split(",")
        if kind == "payer":
            state.R[payer_ix[key]] = float(value)
        elif kind == "payee":
            state.T[payee_ix[key]] = float(value)
        elif kind == "edge":
            u, v = key.split(">")
            state.conf[edge_ix[(payer_ix[u], payee_ix[v])]] = float(value)
        else:
            raise ValueError(f"unknown checkpoint kind {kind!r}")
    return state
