"""Evaluation: classification metrics, AUC, ranking curves, ANOVA,
ablations, risk-threshold sweeps and the semi-supervised protocol."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, IO, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from .graph import PayerPayeeGraph
from .ingest import LabelTable
from .propagation import PropagationConfig, SEMI_SUPERVISED, iterate_until_convergence
from .rating import RiskReport, classify, risk_of


@dataclass
class EvalMetrics:
    illicit_precision: float
    illicit_recall: float
    illicit_f1: float
    licit_precision: float
    licit_recall: float
    licit_f1: float
    accuracy: float
    auc: float | None = None
    n_labeled: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class AnovaResult:
    ss_between: float
    ss_within: float
    ms_between: float
    ms_within: float
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int


def _prf(tp: int, fp: int, fn: int, zero_division: float):
    p = tp / (tp + fp) if tp + fp else zero_division
    r = tp / (tp + fn) if tp + fn else zero_division
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def classification_metrics(predictions: Mapping[str, bool], labels: LabelTable,
                           zero_division: float = 0.0) -> EvalMetrics:
    """Per-class precision/recall/F1 and accuracy over the labeled accounts.

    ``predictions`` maps address -> True for illicit. Accounts without a
    label are ignored; ``zero_division`` is used for a precision or recall
    whose denominator is empty.
    """
    y_true, y_pred = [], []
    for addr, cat in labels.entries.items():
        if addr in predictions:
            y_true.append(cat == "phish-hack")
            y_pred.append(bool(predictions[addr]))
    if not y_true:
        raise ValueError("no labeled account has a prediction")
    t = np.array(y_true)
    p = np.array(y_pred)
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    ip, ir, if1 = _prf(tp, fp, fn, zero_division)
    lp, lr, lf1 = _prf(tn, fn, fp, zero_division)
    return EvalMetrics(ip, ir, if1, lp, lr, lf1, accuracy=(tp + tn) / len(t), n_labeled=len(t))


def auc(risk_scores: Mapping[str, float], labels: LabelTable) -> float:
    """Probability a random illicit account outranks a random licit one (ties count 1/2)."""
    pos, neg = [], []
    for addr, cat in labels.entries.items():
        if addr in risk_scores:
            (pos if cat == "phish-hack" else neg).append(risk_scores[addr])
    if not pos or not neg:
        raise ValueError("AUC needs at least one illicit and one licit labeled account")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


def precision_recall_at_k(ranked: Sequence[str], labels: LabelTable, ks: Iterable[int],
                          strict: bool = False) -> list[tuple[int, float, float]]:
    """``(k, P@k, R@k)`` rows for a risk-descending account ranking.

    By default unlabeled accounts are skipped while walking the ranking, so
    the top ``k`` are the first ``k`` labeled accounts. With ``strict`` the
    top ``k`` are the first ``k`` accounts of any kind and unlabeled ones
    count against precision.
    """
    total_illicit = len(labels.illicit())
    if strict:
        seq = [labels.is_illicit(a) for a in ranked]
    else:
        seq = [labels.is_illicit(a) for a in ranked if a in labels]
    hits = np.cumsum(seq) if seq else np.zeros(0)
    rows = []
    for k in ks:
        if k < 1:
            raise ValueError("k must be >= 1")
        n = min(k, len(seq))
        h = int(hits[n - 1]) if n else 0
        rows.append((k, h / n if n else 0.0, h / total_illicit if total_illicit else 0.0))
    return rows


def one_way_anova(group_a: Sequence[float], group_b: Sequence[float]) -> AnovaResult:
    """Two-group one-way ANOVA; the p-value is the F upper tail via the incomplete beta."""
    groups = [np.asarray(group_a, dtype=np.float64), np.asarray(group_b, dtype=np.float64)]
    if any(len(g) < 2 for g in groups):
        raise ValueError("each group needs at least 2 samples")
    allv = np.concatenate(groups)
    grand = allv.mean()
    ss_between = float(sum(len(g) * (g.mean() - grand) ** 2 for g in groups))
    ss_within = float(sum(((g - g.mean()) ** 2).sum() for g in groups))
    df_b = len(groups) - 1
    df_w = len(allv) - len(groups)
    ms_b = ss_between / df_b
    ms_w = ss_within / df_w
    if ms_w == 0.0:
        if ms_b == 0.0:
            raise ValueError("both groups are constant and equal; F is undefined")
        return AnovaResult(ss_between, ss_within, ms_b, ms_w, math.inf, 0.0, df_b, df_w)
    f = ms_b / ms_w
    p = float(betainc(df_w / 2.0, df_b / 2.0, df_w / (df_w + df_b * f)))
    if p < 1e-300:
        p = 0.0
    return AnovaResult(ss_between, ss_within, ms_b, ms_w, f, p, df_b, df_w)


def score_groups(graph: PayerPayeeGraph, labels: LabelTable) -> tuple[np.ndarray, np.ndarray]:
    """Transaction scores split by the payer's label (illicit, licit).

    Each edge contributes its score once per underlying transaction;
    transactions whose payer is unlabeled are dropped.
    """
    if graph.score is None:
        raise ValueError("graph has no scores")
    cat = np.array([labels.get(a, "") for a in graph.payers.tolist()], dtype=object)[graph.edge_payer]
    rep = graph.multiplicity
    ill = cat == "phish-hack"
    lic = (cat != "phish-hack") & (cat != "")
    return np.repeat(graph.score[ill], rep[ill]), np.repeat(graph.score[lic], rep[lic])


def ablation_ads(graph: PayerPayeeGraph) -> dict[str, tuple[float, bool]]:
    """Per payer: multiplicity-weighted mean outgoing score and whether it is <= 0 (illicit)."""
    s = np.bincount(graph.edge_payer, weights=graph.multiplicity * graph.score, minlength=len(graph.payers))
    ads = s / graph.out_count
    return {a: (float(x), bool(x <= 0.0)) for a, x in zip(graph.payers.tolist(), ads)}


def ablation_random_scores(graph: PayerPayeeGraph, seed: int = 0) -> PayerPayeeGraph:
    """Replace every edge score by an independent uniform draw on [-1, 1].

    Draws come from the counter-based Philox generator keyed by ``seed``,
    edge ``i`` taking the ``i``-th value, so results do not depend on how
    generation is partitioned.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    return graph.with_scores(rng.uniform(-1.0, 1.0, graph.n_edges))


def threshold_sweep(report: RiskReport, labels: LabelTable,
                    rths: Iterable[float] = range(1, 11),
                    zero_division: float = 1.0) -> list[tuple[float, EvalMetrics]]:
    """Classification metrics at each risk threshold.

    A threshold above every labeled risk predicts nothing illicit; its
    precision follows the precision-recall curve convention (1.0) unless
    ``zero_division`` says otherwise.
    """
    risks = report.risk_map()
    area = auc(risks, labels)
    rows = []
    for rth in rths:
        m = classification_metrics(classify(report, rth).predictions(), labels, zero_division)
        m.auc = area
        rows.append((rth, m))
    return rows


def stratified_split(labels: LabelTable, ratio: float = 0.8, seed: int = 0) -> tuple[set[str], set[str]]:
    """Split labeled addresses into (train, test), per class, deterministic in ``seed``."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = set(), set()
    for group in (sorted(labels.illicit()), sorted(labels.licit())):
        order = rng.permutation(len(group))
        n_train = int(round(ratio * len(group)))
        for j, i in enumerate(order):
            (train if j < n_train else test).add(group[i])
    return train, test


def mean_std(rows: Sequence[Mapping[str, float]]) -> dict[str, tuple[float, float]]:
    """Column-wise mean and population std over repeated runs."""
    out = {}
    for key in rows[0]:
        vals = [r[key] for r in rows if r[key] is not None]
        if vals and all(isinstance(v, (int, float)) for v in vals):
            out[key] = (float(np.mean(vals)), float(np.std(vals)))
    return out


def repeat_over_seeds(run: Callable[[int], EvalMetrics], seeds: Sequence[int]) -> dict[str, tuple[float, float]]:
    return mean_std([run(s).as_dict() for s in seeds])


def semi_supervised_run(graph: PayerPayeeGraph, labels: LabelTable, config: PropagationConfig,
                        seed: int = 0, ratio: float = 0.8, rth: float = 6.0) -> EvalMetrics:
    """One RiskProp+ run: seed training payers from labels, score on the held-out accounts."""
    train, test = stratified_split(labels, ratio, seed)
    cfg = replace(config, mode=SEMI_SUPERVISED)
    state = iterate_until_convergence(graph, cfg, labels, train)
    report = classify(risk_of(state, graph, cfg), rth)
    test_labels = labels.restricted_to(test)
    m = classification_metrics(report.predictions(), test_labels)
    try:
        m.auc = auc(report.risk_map(), test_labels)
    except ValueError:
        m.auc = None
    return m


def write_metrics(metrics: EvalMetrics, fh: IO[str], prefix: str = "") -> None:
    for k, v in metrics.as_dict().items():
        fh.write(f"{prefix}{k},{'' if v is None else v}\n")


def format_table(rows: Sequence[tuple[str, EvalMetrics]]) -> str:
    """Fixed-width text table, one row per labeled result."""
    cols = ["illicit_precision", "illicit_recall", "illicit_f1",
            "licit_precision", "licit_recall", "licit_f1", "accuracy", "auc"]
    head = f"{'':>12} " + " ".join(f"{c.replace('_precision', '_P').replace('_recall', '_R'):>10}" for c in cols)
    lines = [head]
    for name, m in rows:
        d = m.as_dict()
        lines.append(f"{str(name):>12} " + " ".join(
            f"{'-':>10}" if d[c] is None else f"{d[c]:>10.4f}" for c in cols))
    return "\n".join(lines)


def write_curves(rows: Iterable[tuple[int, float, float]], fh: IO[str]) -> None:
    fh.write("k,precision,recall\n")
    for k, p, r in rows:
        fh.write(f"{k},{p:.6f},{r:.6f}\n")

