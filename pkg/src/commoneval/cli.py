"""Command-line entry point: ``commoneval {evaluate,correlate,report,synth}``.

Exit codes: 0 success, 1 computation error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys

from . import analysis, baselines, commonality, ingest, synth
from .errors import CommonevalError, DomainError, ParseError, UndefinedMetricError
from .model import Aggregation, EvalConfig, MetricReport, TailPolicy, validate_runset

log = logging.getLogger("commoneval")

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_INPUT = 2

MEAN_LABEL = "(mean)"


class InputError(Exception):
    """Bad user input: missing file, parse failure, failed validation."""


def _parse(path: str, parser):
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return parser(fh)
    except ParseError as exc:
        raise InputError(str(exc)) from None
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        ingest.atomic_write(out, text)


def _config(args) -> EvalConfig:
    try:
        return EvalConfig(
            gamma=args.gamma,
            cutoff_k=args.cutoff,
            alpha=args.alpha,
            tail_policy=TailPolicy(args.tail),
            relevance_threshold=args.threshold,
            aggregation=Aggregation(args.aggregation),
        )
    except DomainError as exc:
        raise InputError(str(exc)) from None


def _threads(args) -> int | None:
    return args.threads if getattr(args, "threads", None) else None


# -- subcommands -------------------------------------------------------------


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    for path in [*args.runs, args.qrels, args.categories, *([args.fairness_groups] if args.fairness_groups else [])]:
        if not os.path.isfile(path):
            raise InputError(f"no such file: {path}")
    runs = []
    for path in args.runs:
        runs.extend(_parse(path, ingest.parse_run_file))
    names = [r.system_name for r in runs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise InputError(f"system tags appear in more than one run file: {', '.join(dupes)}")
    qrels = ingest.binarize(_parse(args.qrels, ingest.parse_qrels), cfg.relevance_threshold)
    index = _parse(args.categories, ingest.parse_categories)
    groups = _parse(args.fairness_groups, ingest.parse_categories) if args.fairness_groups else None

    problems = []
    for run in runs:
        problems.extend(f"{run.system_name}: {d}" for d in validate_runset(run))
    if problems:
        shown = "\n  ".join(problems[:20])
        more = f"\n  ... {len(problems) - 20} more" if len(problems) > 20 else ""
        raise InputError(f"run validation failed:\n  {shown}{more}")
    if not runs:
        raise InputError("no runs found")

    rows = commonality.commonality_report(runs, index, cfg, _threads(args))
    results = baselines.evaluate_runs(runs, qrels, index, cfg, groups)
    rows.extend(baselines.baseline_rows(results))
    meta = {
        "config": cfg.as_metadata(),
        "users": {r.system_name: len(r) for r in runs},
        "categories": index.labels,
        **baselines.baseline_metadata(results),
    }
    report = MetricReport(rows=rows, metadata=meta)
    _emit(ingest.write_report(report, args.format), args.out)
    return EXIT_OK


def _load_reports(paths) -> MetricReport:
    report = MetricReport()
    for path in paths:
        try:
            report = report.merged(_parse(path, ingest.parse_report))
        except DomainError as exc:
            raise InputError(f"{path}: {exc}") from None
    return report


def cmd_correlate(args) -> int:
    report = _load_reports(args.reports)
    if len(report.systems) < 2:
        raise InputError("need >= 2 systems")
    metrics = args.metrics.split(",") if args.metrics else None
    try:
        matrix = analysis.correlation_matrix(report, Aggregation(args.aggregation), args.raw_direction, metrics)
    except CommonevalError as exc:
        raise InputError(str(exc)) from None
    _emit(analysis.write_matrix(matrix, args.format), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    report = _load_reports(args.reports)
    aggregation = Aggregation(args.aggregation)
    systems = args.systems.split(",") if args.systems else sorted({r.system for r in report.rows if r.metric == "commonality"})
    try:
        points = analysis.scatter(report, systems, aggregation)
        table = analysis.disaggregate(report, systems, aggregation)
    except DomainError as exc:
        raise InputError(str(exc)) from None
    os.makedirs(args.out_dir, exist_ok=True)

    out = io.StringIO()
    out.write("system,ndcg,commonality_log\n")
    for p in points:
        out.write(f"{p.system},{ingest.format_value(p.ndcg)},{ingest.format_log(p.commonality_log)}\n")
    scatter_text = out.getvalue()

    out = io.StringIO()
    out.write("system,category,log_value\n")
    for row in table:
        out.write(f"{row.system},{row.category or MEAN_LABEL},{ingest.format_log(row.log_value)}\n")
    disagg_text = out.getvalue()

    ingest.atomic_write(os.path.join(args.out_dir, "scatter.csv"), scatter_text)
    ingest.atomic_write(os.path.join(args.out_dir, "disaggregation.csv"), disagg_text)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = synth.SynthSpec(
            seed=args.seed,
            n_users=args.users,
            n_items=args.items,
            n_categories=args.categories,
            category_size=args.category_size,
            popularity_exponent=args.popularity_exponent,
            relevance_density=args.density,
            disjoint=not args.overlap,
            popular_categories=args.popular_categories,
        )
    except DomainError as exc:
        raise InputError(str(exc)) from None
    depth = args.depth or spec.n_items
    try:
        world = synth.synth_world(spec)
        runs = synth.system_family(world, spec.seed, depth, args.noisy)
    except DomainError as exc:
        raise InputError(str(exc)) from None
    synth.write_world(world, runs, args.out_dir, {"depth": depth, "n_noisy": args.noisy})
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = EvalConfig()
    p.add_argument("--gamma", type=float, default=d.gamma, help="browsing persistence in (0,1) (default %(default)s)")
    p.add_argument("--cutoff", type=int, default=d.cutoff_k, help="cutoff k for NDCG, alpha-NDCG, ERR-IA, RSP, REO")
    p.add_argument("--alpha", type=float, default=d.alpha, help="alpha-NDCG redundancy penalty")
    p.add_argument("--tail", choices=[t.value for t in TailPolicy], default=d.tail_policy.value)
    p.add_argument("--threshold", type=int, default=d.relevance_threshold, help="minimum relevant grade")
    _add_aggregation(p)


def _add_aggregation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--aggregation", choices=[a.value for a in Aggregation], default=Aggregation.ARITHMETIC.value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="commoneval", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score runs with commonality and baseline metrics")
    p.add_argument("--runs", nargs="+", required=True, help="TREC run file(s)")
    p.add_argument("--qrels", required=True)
    p.add_argument("--categories", required=True, help="item<TAB>category TSV")
    p.add_argument("--fairness-groups", help="TSV of groups for RSP/REO (default: the categories)")
    _add_config_flags(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--threads", type=int, help="worker threads (default: $COMMONEVAL_THREADS or CPU count)")
    p.add_argument("-o", "--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("correlate", help="Kendall tau-b between metric leaderboards")
    p.add_argument("reports", nargs="+")
    p.add_argument("--metrics", help="comma-separated subset of metrics")
    _add_aggregation(p)
    p.add_argument(
        "--raw-direction",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="correlate raw metric values (default); --no-raw-direction negates lower-is-better metrics first",
    )
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("report", help="scatter and per-category tables for plotting")
    p.add_argument("reports", nargs="+")
    p.add_argument("--systems", help="comma-separated systems (default: all)")
    _add_aggregation(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic world and run family")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--users", type=int, default=1000)
    p.add_argument("--items", type=int, default=2000)
    p.add_argument("--categories", type=int, default=8)
    p.add_argument("--category-size", type=int, default=25)
    p.add_argument("--popularity-exponent", type=float, default=1.0)
    p.add_argument("--density", type=float, default=0.01)
    p.add_argument("--overlap", action="store_true", help="allow categories to share items")
    p.add_argument("--popular-categories", type=int, default=0)
    p.add_argument("--depth", type=int, help="ranking depth (default: full catalog)")
    p.add_argument("--noisy", type=int, default=5, help="number of noisy oracle/random interpolations")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"commoneval: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (UndefinedMetricError, CommonevalError, ArithmeticError) as exc:
        print(f"commoneval: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
