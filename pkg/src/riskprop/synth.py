"""Synthetic transaction corpora: uniform random networks, planted fraud
motifs, a labeled exchange-economy fixture, and the scalability benchmark.

Every generator is deterministic in its seed and emits ordinary
``TransactionRecord`` lists, so its output goes through the same ingest
and graph code as real data.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .graph import build_graph_from_arrays, score_all_edges
from .ingest import TransactionRecord, LabelTable
from .propagation import PropagationConfig, initialize, step, compute_delta

PATTERNS = (
    "phishing-star",
    "collusion-upstream",
    "laundering-downstream",
    "zero-out-middle",
    "round-transfer",
)

# address namespaces (first byte after 0x)
_USER, _ACTIVE, _HUB, _CORE, _AUX = 0x01, 0x02, 0x03, 0x04, 0x05


def address(ns: int, i: int) -> str:
    return f"0x{ns:02x}{i:038x}"


@dataclass
class SynthSpec:
    n_payers: int
    n_payees: int
    n_transactions: int
    seed: int = 0
    plants: list = field(default_factory=list)   # (kind, params dict) pairs

    def __post_init__(self):
        if min(self.n_payers, self.n_payees, self.n_transactions) < 1:
            raise ValueError("n_payers, n_payees and n_transactions must be >= 1")
        for kind, _ in self.plants:
            if kind not in PATTERNS:
                raise ValueError(f"unsupported pattern {kind!r}")


def random_endpoints(n_payers: int, n_payees: int, n_transactions: int, seed: int = 0):
    """Integer payer/payee ids drawn uniformly; payer i and payee i are the same account."""
    rng = np.random.default_rng(seed)
    return (rng.integers(0, n_payers, n_transactions),
            rng.integers(0, n_payees, n_transactions))


def random_network(spec: SynthSpec) -> tuple[list[TransactionRecord], LabelTable]:
    payer_ids, payee_ids = random_endpoints(spec.n_payers, spec.n_payees, spec.n_transactions, spec.seed)
    rng = np.random.default_rng([spec.seed, 1])
    values = rng.integers(1, 10**18, spec.n_transactions)
    records = [TransactionRecord(f"r{spec.seed}-{i}", address(_USER, int(u)), address(_USER, int(v)), int(x))
               for i, (u, v, x) in enumerate(zip(payer_ids, payee_ids, values))]
    labels = LabelTable()
    for j, (kind, params) in enumerate(spec.plants):
        records, planted = plant_pattern(records, kind, params, seed=spec.seed * 1000 + j)
        labels.entries.update(planted.entries)
    return records, labels


class _Emitter:
    def __init__(self, records, tag, rng):
        self.records = list(records)
        self.tag = tag
        self.rng = rng
        self.n = 0

    def __call__(self, payer, payee, value=None):
        if value is None:
            value = int(self.rng.integers(10**15, 10**18))
        self.records.append(TransactionRecord(f"{self.tag}-{self.n}", payer, payee, value))
        self.n += 1


def _busiest_payee(records: Sequence[TransactionRecord]) -> str | None:
    if not records:
        return None
    accounts, counts = np.unique([r.payee for r in records], return_counts=True)
    return str(accounts[np.argmax(counts)])


def _fresh(used: set, ns: int, start: int) -> Iterable[str]:
    i = start
    while True:
        a = address(ns, i)
        i += 1
        if a not in used:
            yield a


def plant_pattern(base: Sequence[TransactionRecord], kind: str, params: dict | None = None,
                  seed: int = 0) -> tuple[list[TransactionRecord], LabelTable]:
    """Append one fraud motif to ``base`` and label its core account(s) phish-hack.

    ``params`` may name a ``hub`` account to cash out into; by default the
    busiest payee of ``base`` is used, or a fresh account when ``base`` is
    empty. Other parameters per kind (defaults in brackets):

    phishing-star         victims [50], forward [2], accomplices [0]: one-shot
                          victims pay the core, which forwards ``forward``
                          payments to the hub and one payment to each of
                          ``accomplices`` fresh accounts.
    collusion-upstream    feeders [5], feed [2], forward [1]: few-transaction
                          feeders fund the core, which pays the hub.
    laundering-downstream sinks [3]: the core pays each sink once; each sink
                          pays the hub once.
    zero-out-middle       depth [3], n [2]: a chain source -> m1 .. m_depth ->
                          hub where every middle account sends exactly as many
                          payments as it receives. Middles are the cores.
    round-transfer        n [2]: hub -> wallet -> hub, ``n`` payments each way.
    """
    if kind not in PATTERNS:
        raise ValueError(f"unsupported pattern {kind!r}; expected one of {PATTERNS}")
    p = dict(params or {})
    rng = np.random.default_rng(seed)
    used = {r.payer for r in base} | {r.payee for r in base}
    fresh = _fresh(used, _AUX, int(seed) << 20)
    core_ids = _fresh(used, _CORE, int(seed) << 20)
    emit = _Emitter(base, f"{kind}-{seed}", rng)
    hub = p.get("hub") or _busiest_payee(base) or next(fresh)
    cores = []

    if kind == "phishing-star":
        core = next(core_ids)
        cores.append(core)
        for _ in range(p.get("victims", 50)):
            emit(next(fresh), core)
        for _ in range(p.get("forward", 2)):
            emit(core, hub)
        for _ in range(p.get("accomplices", 0)):
            emit(core, next(fresh))
    elif kind == "collusion-upstream":
        core = next(core_ids)
        cores.append(core)
        for _ in range(p.get("feeders", 5)):
            feeder = next(fresh)
            for _ in range(p.get("feed", 2)):
                emit(feeder, core)
        for _ in range(p.get("forward", 1)):
            emit(core, hub)
    elif kind == "laundering-downstream":
        core = next(core_ids)
        cores.append(core)
        for _ in range(p.get("victims", 10)):
            emit(next(fresh), core)
        for _ in range(p.get("sinks", 3)):
            sink = next(fresh)
            emit(core, sink)
            emit(sink, hub)
    elif kind == "zero-out-middle":
        n = p.get("n", 2)
        prev = next(fresh)
        chain = [next(core_ids) for _ in range(p.get("depth", 3))]
        cores.extend(chain)
        for acct in chain + [hub]:
            for _ in range(n):
                emit(prev, acct)
            prev = acct
    elif kind == "round-transfer":
        wallet = next(core_ids)
        cores.append(wallet)
        n = p.get("n", 2)
        for _ in range(n):
            emit(hub, wallet)
        for _ in range(n):
            emit(wallet, hub)
    return emit.records, LabelTable({c: "phish-hack" for c in cores})


def exchange_economy(n_users: int = 300, n_active: int = 20, seed: int = 0) -> tuple[list[TransactionRecord], LabelTable]:
    """Background traffic around one exchange-like hub.

    Busy accounts (traders, services) deposit into the hub and pay users;
    the hub pays out withdrawals to every user; users make a few peer
    payments. The hub is labeled ``exchange``, busy accounts ``licit-other``.
    """
    rng = np.random.default_rng([seed, 7])
    emit = _Emitter([], f"econ-{seed}", rng)
    users = [address(_USER, i) for i in range(n_users)]
    active = [address(_ACTIVE, i) for i in range(n_active)]
    hub = address(_HUB, 0)
    for a in active:
        for _ in range(rng.integers(20, 40)):
            emit(a, hub)
        for _ in range(rng.integers(40, 80)):
            emit(a, users[rng.integers(n_users)])
    for u in users:
        for _ in range(rng.integers(1, 6)):
            emit(hub, u)
        for _ in range(rng.integers(0, 3)):
            emit(u, users[rng.integers(n_users)])
        if rng.random() < 0.3:
            emit(u, active[rng.integers(n_active)])
    labels = LabelTable({hub: "exchange", **{a: "licit-other" for a in active}})
    return emit.records, labels


def planted_corpus(seed: int = 0, n_users: int = 300, n_active: int = 20, n_cores: int = 9,
                   victims: int = 30) -> tuple[list[TransactionRecord], LabelTable]:
    """Exchange economy plus ``n_cores`` phishing stars cashing out into the hub.

    Each star pays the hub once and cycles through 0, 1, 2 fresh accomplices,
    so planted risks are graded.
    """
    records, labels = exchange_economy(n_users, n_active, seed)
    hub = address(_HUB, 0)
    for c in range(n_cores):
        records, planted = plant_pattern(
            records, "phishing-star", {"victims": victims, "forward": 1, "accomplices": c % 3, "hub": hub},
            seed=seed * 1000 + c)
        labels.entries.update(planted.entries)
    return records, labels


@dataclass
class BenchRow:
    edges: int
    nodes: int
    iterations: int
    build_ms: float
    propagate_ms: float
    total_ms: float

    @property
    def per_iteration_ms(self) -> float:
        return self.propagate_ms / max(self.iterations, 1)


def scalability_benchmark(sizes: Sequence[int], config: PropagationConfig | None = None,
                          seed: int = 0, degree: float = 4.0, repeats: int = 1) -> list[BenchRow]:
    """Time build + score + propagate on uniform random graphs of the given transaction counts.

    Node pools scale with size (``size / degree`` payers and payees) so the
    density stays fixed. With ``repeats > 1`` the fastest run is kept.
    """
    config = config or PropagationConfig()
    rows = []
    for size in sizes:
        n_nodes = max(2, int(size / degree))
        pu, pv = random_endpoints(n_nodes, n_nodes, size, seed)
        best = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            g = score_all_edges(build_graph_from_arrays(pu, pv))
            t1 = time.perf_counter()
            state = initialize(g, config)
            _ = g.by_payee  # cache the permutation outside the timed loop
            t2 = time.perf_counter()
            while state.t < config.max_iterations:
                new = step(state, g, config.threads)
                d = compute_delta(state, new, g, config.normalized_delta)[3]
                state = new
                if d < config.epsilon:
                    break
            t3 = time.perf_counter()
            row = BenchRow(edges=g.n_edges, nodes=len(np.union1d(pu, pv)), iterations=state.t,
                           build_ms=(t1 - t0) * 1e3, propagate_ms=(t3 - t2) * 1e3,
                           total_ms=(t1 - t0 + t3 - t2) * 1e3)
            if best is None or row.total_ms < best.total_ms:
                best = row
        rows.append(best)
    return rows


def write_bench(rows: Iterable[BenchRow], fh: IO[str]) -> None:
    fh.write("edges,nodes,iterations,build_ms,propagate_ms,total_ms\n")
    for r in rows:
        fh.write(f"{r.edges},{r.nodes},{r.iterations},{r.build_ms:.3f},{r.propagate_ms:.3f},{r.total_ms:.3f}\n")
