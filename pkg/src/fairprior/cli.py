"""Command-line entry point: ``fairprior {filter,fair,eval,report}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .filters import FilterSpec, apply_filter
from .graph import (
    Graph,
    GraphFormatError,
    _tokens,
    load_edge_list,
    load_labels,
    load_node_set,
    normalize,
    select_communities,
)
from .metrics import SensitiveGroups
from .optimizer import OptimizerSettings

log = logging.getLogger("fairprior")


def read_prior(path, graph: Graph) -> np.ndarray:
    """Prior file: one ``node [value]`` per line; a missing value means 1."""
    q = np.zeros(graph.node_count)
    for lineno, parts in _tokens(path):
        node = parts[0]
        if node not in graph.node_ids:
            raise KeyError(f"unknown node id {node!r} at {path}:{lineno}")
        try:
            value = float(parts[1]) if len(parts) > 1 else 1.0
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: prior value {parts[1]!r} is not a number") from None
        if not 0 <= value <= 1:
            raise GraphFormatError(f"{path}:{lineno}: prior value {value} outside [0, 1]")
        q[graph.node_ids[node]] = value
    return q


def write_scores(graph: Graph, scores, out) -> None:
    lines = [f"{name} {score!r}" for name, score in zip(graph.labels, map(float, scores))]
    text = "\n".join(lines) + "\n"
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _prior_and_groups(args, graph: Graph, need_groups: bool):
    """Resolve the prior and, if needed, the sensitive groups from the flags."""
    explicit = load_node_set(args.sensitive, graph) if getattr(args, "sensitive", None) else None
    positives = set()
    if args.prior:
        q = read_prior(args.prior, graph)
        sensitive = explicit
    elif args.labels:
        table = load_labels(args.labels, graph)
        positives, sensitive = select_communities(table, args.min_size, explicit)
        _, _, q = harness.split(graph.node_count, positives, harness.SplitSpec(args.fraction, args.seed))
    else:
        raise SystemExit("error: give --prior, or --labels to sample one")
    if need_groups and sensitive is None:
        if args.labels:
            _, sensitive = select_communities(load_labels(args.labels, graph), args.min_size)
        else:
            raise SystemExit("error: --sensitive (or --labels) is required for fairness methods")
    groups = SensitiveGroups.from_nodes(graph.node_count, sensitive) if need_groups else None
    return q, groups, positives


def cmd_filter(args) -> int:
    graph = load_edge_list(args.graph)
    q, _, _ = _prior_and_groups(args, graph, need_groups=False)
    spec = FilterSpec.parse(args.filter, args.tolerance)
    write_scores(graph, apply_filter(spec, normalize(graph, "symmetric"), q), args.out)
    return 0


def cmd_fair(args) -> int:
    graph = load_edge_list(args.graph)
    q, groups, positives = _prior_and_groups(args, graph, need_groups=True)
    spec = FilterSpec.parse(args.filter, args.tolerance)
    data = harness.Dataset(Path(args.graph).stem, graph, groups, positives)
    posterior, params = harness.method_posterior(args.method, spec, data, q, OptimizerSettings())
    write_scores(graph, posterior, args.out)
    if params:
        log.info("tuned parameters: %s", ", ".join(f"{k}={v:.6g}" for k, v in params.items()))
    return 0


def cmd_eval(args) -> int:
    config = harness.GridConfig.load(args.config) if args.config else harness.default_suite()
    if args.seed is not None:
        config.seed = args.seed
    if args.tolerance is not None:
        config.tolerance = args.tolerance
    if args.method:
        config.methods = args.method
    if args.filter:
        for name in args.filter:
            FilterSpec.parse(name)
        config.filters = args.filter
    if args.fraction:
        config.fractions = args.fraction
    if args.no_wall_time:
        config.record_wall_time = False
    results = harness.run_grid(config, workers=args.workers)
    harness.write_results_csv(results, args.out)
    failed = sum(r.failed for r in results)
    log.info("%d cells written to %s (%d failed)", len(results), args.out, failed)
    return 0


def cmd_report(args) -> int:
    results = harness.read_results_csv(args.results)
    groups = ("none", "sweep") if args.group == "both" else (args.group,)
    summaries = []
    for g in groups:
        relevant = [r for r in results if g == "all" or FilterSpec.parse(r.cell.filter).sweep == (g == "sweep")]
        if relevant:
            summaries.append(harness.summarize(relevant, g, args.threshold))
    if not summaries:
        raise SystemExit("error: no results in the requested group")
    print("\n\n".join(harness.format_summary(s) for s in summaries))
    if args.out:
        rows = [row for s in summaries for row in harness.summary_rows(s)]
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairprior", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def scoring(p):
        p.add_argument("--graph", required=True, help="edge-list file")
        p.add_argument("--filter", default="PPR.85", help="filter name such as PPR.85, HK7 or PPR.99S")
        p.add_argument("--prior", help="prior file with 'node [value]' lines")
        p.add_argument("--labels", help="community file; samples a prior when --prior is absent")
        p.add_argument("--min-size", type=int, default=100, help="community size threshold for --labels")
        p.add_argument("--fraction", type=float, default=0.1, help="training fraction when sampling a prior")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tolerance", type=float, default=1e-9)
        p.add_argument("--out", help="scores file (stdout when omitted)")

    p = sub.add_parser("filter", help="score nodes with a graph filter")
    scoring(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("fair", help="score nodes with a fairness-aware method")
    scoring(p)
    p.add_argument("--method", default="FairEdit-C", choices=harness.METHODS)
    p.add_argument("--sensitive", help="file listing sensitive node ids")
    p.set_defaults(func=cmd_fair)

    p = sub.add_parser("eval", help="run an experiment grid into a results CSV")
    p.add_argument("--config", help="YAML grid config (synthetic suite when omitted)")
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--method", action="append", choices=harness.METHODS, help="restrict methods (repeatable)")
    p.add_argument("--filter", action="append", help="restrict filters (repeatable)")
    p.add_argument("--fraction", action="append", type=float, help="restrict split fractions (repeatable)")
    p.add_argument("--no-wall-time", action="store_true", help="write nan wall times for byte-stable output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarize a results CSV")
    p.add_argument("results")
    p.add_argument("--group", choices=("none", "sweep", "all", "both"), default="both")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--out", help="write the summary as CSV too")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
