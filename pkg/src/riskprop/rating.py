"""Turn converged reliabilities into 0-10 risk ratings and labels."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import IO, Mapping

import numpy as np

from .graph import PayerPayeeGraph
from .propagation import PropagationConfig, PropagationState

ILLICIT = "illicit"
LICIT = "licit"


@dataclass(frozen=True, eq=False)
class RiskReport:
    address: np.ndarray       # every account, sorted
    reliability: np.ndarray
    trustiness: np.ndarray    # nan where the account never received
    risk: np.ndarray
    is_default: np.ndarray    # True where the account never sent
    predicted: np.ndarray | None = None   # True = illicit

    def __len__(self):
        return len(self.address)

    def risk_map(self) -> dict[str, float]:
        return dict(zip(self.address.tolist(), self.risk.tolist()))

    def predictions(self) -> dict[str, bool]:
        if self.predicted is None:
            raise ValueError("report has not been classified")
        return dict(zip(self.address.tolist(), self.predicted.tolist()))

    def order(self) -> list[int]:
        """Row indices by risk descending, address ascending."""
        addr = self.address.tolist()
        risk = self.risk.tolist()
        return sorted(range(len(addr)), key=lambda i: (-risk[i], addr[i]))


def risk_from_reliability(r):
    return (1.0 - np.asarray(r, dtype=np.float64)) * 10.0


def risk_of(state: PropagationState, graph: PayerPayeeGraph,
            config: PropagationConfig | None = None) -> RiskReport:
    """One row per account. Accounts without outgoing transactions get ``init_R``."""
    config = config or PropagationConfig()
    accounts = graph.accounts()
    n = len(accounts)
    rel = np.full(n, config.init_R)
    trust = np.full(n, np.nan)
    is_default = np.ones(n, dtype=bool)
    pi = np.searchsorted(accounts, graph.payers)
    vi = np.searchsorted(accounts, graph.payees)
    rel[pi] = state.R
    is_default[pi] = False
    trust[vi] = state.T
    return RiskReport(address=accounts, reliability=rel, trustiness=trust,
                      risk=risk_from_reliability(rel), is_default=is_default)


def classify(report: RiskReport, rth: float = 6.0) -> RiskReport:
    """Mark accounts with ``risk >= rth`` illicit."""
    if not 0.0 <= rth <= 10.0:
        raise ValueError(f"risk threshold {rth} outside [0, 10]")
    return replace(report, predicted=report.risk >= rth)


def classify_top_percent(report: RiskReport, percent: float = 1.0) -> RiskReport:
    """Mark the highest-risk ``percent`` of accounts (rounded up) illicit."""
    if not 0.0 < percent <= 100.0:
        raise ValueError(f"percent {percent} outside (0, 100]")
    n_top = math.ceil(len(report) * percent / 100.0)
    pred = np.zeros(len(report), dtype=bool)
    pred[report.order()[:n_top]] = True
    return replace(report, predicted=pred)


def top_k(report: RiskReport, k: int) -> list[str]:
    if k < 1:
        raise ValueError("k must be >= 1")
    addr = report.address.tolist()
    return [addr[i] for i in report.order()[:k]]


def write_report(report: RiskReport, fh: IO[str], header: Mapping[str, object] | None = None) -> None:
    """CSV sorted by risk descending; ``header`` items become leading ``# key=value`` lines."""
    for k, v in (header or {}).items():
        fh.write(f"# {k}={v}\n")
    fh.write("address,reliability,trustiness,risk,is_default,predicted\n")
    addr = report.address.tolist()
    for i in report.order():
        t = report.trustiness[i]
        pred = "" if report.predicted is None else (ILLICIT if report.predicted[i] else LICIT)
        fh.write(f"{addr[i]},{report.reliability[i]:.6f},{'' if np.isnan(t) else f'{t:.6f}'},"
                 f"{report.risk[i]:.6f},{int(report.is_default[i])},{pred}\n")


def read_report(fh: IO[str]) -> RiskReport:
    rows = [line.rstrip("\n").split(",") for line in fh if line.strip() and not line.startswith("#")]
    if not rows or rows[0][0] != "address":
        raise ValueError("not a risk report (missing header)")
    rows = sorted(rows[1:], key=lambda r: r[0])
    pred = [r[5] for r in rows]
    return RiskReport(
        address=np.array([r[0] for r in rows]),
        reliability=np.array([float(r[1]) for r in rows]),
        trustiness=np.array([float(r[2]) if r[2] else np.nan for r in rows]),
        risk=np.array([float(r[3]) for r in rows]),
        is_default=np.array([r[4] == "1" for r in rows]),
        predicted=None if any(p == "" for p in pred) else np.array([p == ILLICIT for p in pred]),
    )
