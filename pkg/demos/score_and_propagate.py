"""Walk through the engine on a hand-made ledger.

A scammer collects one-shot payments from fresh victims and moves the money
to an exchange, partly through a one-off mule account. Ordinary users trade
with each other and with the exchange. We build the payer/payee graph, look
at the edge scores, run propagation, and print the risk ranking: the mule
and the scammer end up above every ordinary account.
"""
import io

import numpy as np

from riskprop import build_graph, iterate_until_convergence, risk_of, score_all_edges
from riskprop.ingest import TransactionRecord
from riskprop.propagation import PropagationConfig, write_trace

rng = np.random.default_rng(0)
records = []


def pay(u, v):
    records.append(TransactionRecord(f"t{len(records)}", u, v, 10**18))


# ordinary economy: 8 users, each paying the exchange and a few peers
users = [f"user{i}" for i in range(8)]
for u in users:
    for _ in range(rng.integers(3, 7)):
        pay(u, "exchange")
    for _ in range(3):
        pay("exchange", u)
    for _ in range(2):
        pay(u, users[rng.integers(len(users))])

# the scam: 12 victims pay once each; the scammer cashes out directly and via a mule
for i in range(12):
    pay(f"victim{i}", "scammer")
pay("scammer", "exchange")
pay("scammer", "mule")
pay("mule", "exchange")

graph = score_all_edges(build_graph(records))
print(f"{len(graph.payers)} payers, {len(graph.payees)} payees, {graph.n_edges} edges "
      f"from {graph.n_transactions} transactions; maxOut={graph.max_out}, maxIn={graph.max_in}")

# scores near +1 mean both ends are busy, near -1 both ends barely act
print("\nedge scores around the scammer:")
for payer, payee, m, s in graph.edges():
    if payer in ("scammer", "mule", "victim0"):
        print(f"  {payer:>9} -> {payee:<9} x{m}  score {s:+.3f}")

state = iterate_until_convergence(graph, PropagationConfig())
print(f"\n{state.reason} after {state.t} iterations (alpha={state.alpha:.3f})")

report = risk_of(state, graph)
print("\nriskiest accounts:")
for i in report.order()[:6]:
    flag = " (never sent; default)" if report.is_default[i] else ""
    print(f"  {report.address[i]:>9}  risk {report.risk[i]:.2f}{flag}")

print("\nper-iteration deltas:")
buf = io.StringIO()
write_trace(state, buf)
print("\n".join(buf.getvalue().splitlines()[:6]))
