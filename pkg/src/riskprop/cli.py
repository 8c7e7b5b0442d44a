"""Command-line entry point: ``riskprop {rate,evaluate,sweep,bench,synth}``.

Exit codes: 0 success/converged, 2 propagation hit ``--max-iters``,
1 usage or I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .evaluate import (ablation_ads, ablation_random_scores, auc, classification_metrics,
                       format_table, one_way_anova, precision_recall_at_k, repeat_over_seeds,
                       score_groups, semi_supervised_run, stratified_split, threshold_sweep,
                       write_curves, write_metrics)
from .graph import build_graph, score_all_edges, write_graph
from .ingest import (IngestError, extract_largest_wcc, filter_zero_value, parse_labels,
                     parse_transactions, write_labels, write_transactions)
from .propagation import (SEMI_SUPERVISED, UNSUPERVISED, PropagationConfig,
                          iterate_until_convergence, write_trace)
from .rating import classify, classify_top_percent, read_report, risk_of, top_k, write_report
from .synth import (PATTERNS, SynthSpec, planted_corpus, random_network, scalability_benchmark,
                    write_bench)

log = logging.getLogger("riskprop")

EXIT_OK, EXIT_USAGE, EXIT_MAX_ITERS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    """``"1,5,10"`` or ``"1..10"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(float(part)))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return out


def _prop_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("propagation")
    g.add_argument("--epsilon", type=float, default=0.01)
    g.add_argument("--max-iters", type=int, default=1000)
    g.add_argument("--init-t", type=float, default=0.5)
    g.add_argument("--init-r", type=float, default=0.7)
    g.add_argument("--init-conf", type=float, default=0.5)
    g.add_argument("--normalized-delta", action="store_true",
                   help="divide each summed change by its element count")
    g.add_argument("--no-clamp-illicit", action="store_true",
                   help="let labeled phish-hack training payers move away from R=0")
    g.add_argument("--semi-supervised", action="store_true",
                   help="seed training payers' reliability from --labels")
    g.add_argument("--split", type=float, default=0.8, help="training fraction per class")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskprop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="transactions -> per-account risk report")
    p.add_argument("--transactions", required=True, type=Path)
    p.add_argument("--labels", type=Path)
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.add_argument("--trace", type=Path, help="write per-iteration deltas here")
    p.add_argument("--dump-graph", type=Path)
    p.add_argument("--rth", type=float, default=6.0)
    p.add_argument("--top-percent", type=float, help="classify the top PERCENT of accounts illicit instead of --rth")
    p.add_argument("--seed", type=int, default=0)
    _prop_flags(p)

    p = sub.add_parser("evaluate", help="score a risk report against labels")
    p.add_argument("--report", type=Path, help="report from 'rate' (else rated from --transactions)")
    p.add_argument("--transactions", type=Path, help="needed for --anova, --ablation, --semi-supervised")
    p.add_argument("--labels", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--rth", type=float, default=6.0)
    p.add_argument("--top-percent", type=float)
    p.add_argument("--ks", type=_int_list, default=[10, 20, 50, 100, 150])
    p.add_argument("--strict-at-k", action="store_true", help="count unlabeled top-k accounts as misses")
    p.add_argument("--sweep-rth", type=_int_list)
    p.add_argument("--anova", action="store_true")
    p.add_argument("--ablation", choices=["ads", "random"], action="append")
    p.add_argument("--repeats", type=int, default=1, help="semi-supervised runs, seeds seed..seed+N-1")
    p.add_argument("--seed", type=int, default=0)
    _prop_flags(p)

    p = sub.add_parser("sweep", help="metrics at each risk threshold")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--labels", type=Path)
    p.add_argument("--sweep-rth", type=_int_list, default=list(range(1, 11)))
    p.add_argument("--out", type=Path)

    p = sub.add_parser("bench", help="scalability benchmark on random graphs")
    p.add_argument("--sizes", type=_int_list, default=[10_000, 20_000, 40_000, 80_000])
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    _prop_flags(p)

    p = sub.add_parser("synth", help="write a synthetic transactions/labels corpus")
    p.add_argument("--out", type=Path, required=True, help="transactions CSV")
    p.add_argument("--labels-out", type=Path)
    p.add_argument("--planted", action="store_true", help="labeled exchange economy with phishing stars")
    p.add_argument("--cores", type=int, default=9)
    p.add_argument("--payers", type=int, default=1000)
    p.add_argument("--payees", type=int, default=1000)
    p.add_argument("--n-tx", type=int, default=5000)
    p.add_argument("--plant", choices=PATTERNS, action="append", default=[])
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args) -> PropagationConfig:
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.semi_supervised and not args.labels:
        raise UsageError("--semi-supervised requires --labels")
    if not 0.0 < args.split < 1.0:
        raise UsageError("--split must be in (0, 1)")
    try:
        return PropagationConfig(
            init_T=args.init_t, init_R=args.init_r, init_Conf=args.init_conf,
            epsilon=args.epsilon, max_iterations=args.max_iters,
            mode=SEMI_SUPERVISED if args.semi_supervised else UNSUPERVISED,
            clamp_illicit=not args.no_clamp_illicit, normalized_delta=args.normalized_delta,
            threads=args.threads,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


_NOT_ECHOED = {"threads", "verbose", "command", "out", "trace", "dump_graph", "labels_out"}


def _header(command: str, args, config: PropagationConfig | None = None) -> dict:
    # thread count and output paths never change results, so they stay out of the header
    h = {"riskprop": __version__, "command": command}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_ECHOED:
            continue
        h[k] = v
    if config is not None:
        h.update({f"config.{k}": v for k, v in config.as_dict().items() if k != "threads"})
    return h


def _load_records(path: Path):
    with open(path, "rb") as fh:
        parsed = parse_transactions(fh)
    for err in parsed.errors[:20]:
        log.warning("%s:%d: skipped row: %s", path, err.line, err.message)
    if parsed.errors:
        log.warning("%s: %d malformed rows skipped", path, len(parsed.errors))
    records = filter_zero_value(parsed.records)
    if not records:
        raise UsageError(f"{path}: no transactions with positive value")
    return extract_largest_wcc(records)


def _load_labels(path: Path | None):
    if path is None:
        return None
    with open(path, "rb") as fh:
        return parse_labels(fh)


def _rate(args, config):
    graph = score_all_edges(build_graph(_load_records(args.transactions)))
    labels = _load_labels(args.labels)
    training = None
    if config.mode == SEMI_SUPERVISED:
        training, _ = stratified_split(labels, args.split, args.seed)
    state = iterate_until_convergence(graph, config, labels, training)
    log.info("%s after %d iterations", state.reason, state.t)
    report = risk_of(state, graph, config)
    report = classify_top_percent(report, args.top_percent) if args.top_percent else classify(report, args.rth)
    return graph, state, report


def _open_out(path: Path | None):
    if path is None:
        return sys.stdout
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def cmd_rate(args) -> int:
    config = _config(args)
    graph, state, report = _rate(args, config)
    header = _header("rate", args, config)
    header.update(iterations=state.t, converged=state.converged)
    fh = _open_out(args.out)
    try:
        write_report(report, fh, header)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.trace:
        with _open_out(args.trace) as fh:
            write_trace(state, fh)
    if args.dump_graph:
        with _open_out(args.dump_graph) as fh:
            write_graph(graph, fh)
    return EXIT_OK if state.converged else EXIT_MAX_ITERS


def _write_kv(path: Path, header: dict, rows) -> None:
    with _open_out(path) as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        fh.write("metric,value\n")
        for k, v in rows:
            fh.write(f"{k},{'' if v is None else v}\n")


def cmd_evaluate(args) -> int:
    if not args.labels:
        raise UsageError("evaluate requires --labels")
    if not args.report and not args.transactions:
        raise UsageError("evaluate needs --report or --transactions")
    if (args.anova or args.ablation or args.semi_supervised) and not args.transactions:
        raise UsageError("--anova, --ablation and --semi-supervised need --transactions")
    config = _config(args)
    labels = _load_labels(args.labels)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    header = _header("evaluate", args, config)

    graph = None
    if args.transactions:
        graph = score_all_edges(build_graph(_load_records(args.transactions)))
    if args.report:
        with open(args.report) as fh:
            report = read_report(fh)
    else:
        state = iterate_until_convergence(graph, replace(config, mode=UNSUPERVISED))
        report = risk_of(state, graph, config)
    report = classify_top_percent(report, args.top_percent) if args.top_percent else classify(report, args.rth)

    metrics = classification_metrics(report.predictions(), labels)
    metrics.auc = auc(report.risk_map(), labels)
    _write_kv(out / "metrics.csv", header, metrics.as_dict().items())
    table = [("riskprop", metrics)]

    curves = precision_recall_at_k(top_k(report, len(report)), labels, args.ks, strict=args.strict_at_k)
    with open(out / "curves.csv", "w") as fh:
        write_curves(curves, fh)

    if args.sweep_rth:
        _write_sweep(out / "sweep.csv", threshold_sweep(report, labels, args.sweep_rth), header)

    if args.anova:
        rows = []
        for name, g in (("deanonymous", graph), ("random", ablation_random_scores(graph, args.seed))):
            res = one_way_anova(*score_groups(g, labels))
            rows += [(f"{name}.{k}", v) for k, v in vars(res).items()]
            print(f"ANOVA {name:>12}: MS_between={res.ms_between:.4g} MS_within={res.ms_within:.4g} "
                  f"F={res.f_statistic:.4g} p={res.p_value:.4g}")
        _write_kv(out / "anova.csv", header, rows)

    for kind in args.ablation or []:
        if kind == "ads":
            preds = {a: ill for a, (_, ill) in ablation_ads(graph).items()}
            m = classification_metrics(preds, labels.restricted_to(preds))
            table.append(("w/o NP", m))
        else:
            g = ablation_random_scores(graph, args.seed)
            st = iterate_until_convergence(g, replace(config, mode=UNSUPERVISED))
            rep = classify(risk_of(st, g, config), args.rth)
            m = classification_metrics(rep.predictions(), labels)
            m.auc = auc(rep.risk_map(), labels)
            table.append(("w/o DS", m))
        _write_kv(out / f"ablation_{kind}.csv", header, m.as_dict().items())

    if args.semi_supervised:
        seeds = range(args.seed, args.seed + max(args.repeats, 1))
        agg = repeat_over_seeds(
            lambda s: semi_supervised_run(graph, labels, config, s, args.split, args.rth), seeds)
        rows = [(f"{k}.mean", m) for k, (m, _) in agg.items()] + [(f"{k}.std", s) for k, (_, s) in agg.items()]
        _write_kv(out / "semi_supervised.csv", header, rows)
        print("RiskProp+ over seeds " + ", ".join(map(str, seeds)))
        for k, (m, s) in agg.items():
            print(f"  {k:>18}: {m:.4f} ± {s:.4f}")

    print(format_table(table))
    return EXIT_OK


def _write_sweep(path: Path, rows, header: dict | None = None) -> None:
    with _open_out(path) as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        keys = list(rows[0][1].as_dict())
        fh.write("rth," + ",".join(keys) + "\n")
        for rth, m in rows:
            d = m.as_dict()
            fh.write(f"{rth}," + ",".join("" if d[k] is None else f"{d[k]}" for k in keys) + "\n")


def cmd_sweep(args) -> int:
    if not args.labels:
        raise UsageError("sweep requires --labels")
    with open(args.report) as fh:
        report = read_report(fh)
    rows = threshold_sweep(report, _load_labels(args.labels), args.sweep_rth)
    if args.out:
        _write_sweep(args.out, rows, _header("sweep", args))
    print(format_table([(f"RTH={r}", m) for r, m in rows]))
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _config(args)
    rows = scalability_benchmark(args.sizes, config, seed=args.seed, repeats=args.repeats)
    fh = _open_out(args.out)
    try:
        for k, v in _header("bench", args, config).items():
            fh.write(f"# {k}={v}\n")
        write_bench(rows, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.planted:
        records, labels = planted_corpus(args.seed, n_cores=args.cores)
    else:
        spec = SynthSpec(args.payers, args.payees, args.n_tx, args.seed, [(k, {}) for k in args.plant])
        records, labels = random_network(spec)
    with _open_out(args.out) as fh:
        write_transactions(records, fh)
    if args.labels_out:
        with _open_out(args.labels_out) as fh:
            write_labels(labels, fh)
    return EXIT_OK


COMMANDS = {"rate": cmd_rate, "evaluate": cmd_evaluate, "sweep": cmd_sweep,
            "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, IngestError, OSError, ValueError) as exc:
        print(f"riskprop {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
