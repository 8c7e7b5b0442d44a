"""Account risk rating on payer/payee transaction graphs.

Transactions become a directed bipartite graph whose edges carry a
de-anonymous score; Trustiness, Reliability and Confidence are propagated
to a fixed point and each account's risk is ``(1 - reliability) * 10``.
"""
__version__ = "0.1.0"

from .ingest import (CATEGORIES, IngestError, LabelTable, TransactionRecord, extract_largest_wcc,
                     filter_zero_value, parse_labels, parse_transactions)
from .graph import PayerPayeeGraph, build_graph, build_graph_from_arrays, deanonymous_score, score_all_edges
from .propagation import (PropagationConfig, PropagationError, PropagationState, compute_delta, initialize,
                          iterate_until_convergence, update_confidence, update_reliability,
                          update_trustiness)
from .rating import RiskReport, classify, classify_top_percent, risk_of, top_k
