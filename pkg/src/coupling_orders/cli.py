"""Command-line entry point: ``coupling-orders <subcommand> ...``.

Payload files never carry timestamps or run metadata, so identical inputs
and flags give identical bytes. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .bytecode import extract_static_graph, iter_class_files
from .compare import comparison_suite
from .errors import CouplingError
from .metrics import all_vectors, ranking, write_degrees_csv, write_rankings_csv
from .model import (
    ALL_SELECTORS, AnalysisFilter, Granularity, InnerClassMode, WeightedDependencyGraph,
    read_call_facts, write_call_facts,
)
from .report import render_markdown, results_csv, write_results_csv
from .scenario import load_scenario
from .simulator import BASE_TIMESTAMP, simulate_trace, write_trace_file
from .traces import (
    SEPARATORS, ErrorPolicy, MALFORMED_LIMIT, TraceStats, ingest_files, trace_stats_report,
    write_stats_csv,
)

log = logging.getLogger("coupling_orders")

EXIT_OK = 0
EXIT_ERROR = 1


class CliError(Exception):
    pass


def _filter(args) -> AnalysisFilter:
    return AnalysisFilter(tuple(args.include or ()), tuple(args.exclude or ()))


def _inner_mode(args) -> InnerClassMode:
    return InnerClassMode.FOLD_INTO_OUTER if args.inner_classes == "fold" else InnerClassMode.KEEP_DISTINCT


def _out_path(args, name: str, inputs: Sequence[str] = ()) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / name
    resolved = target.resolve()
    for src in inputs:
        if src != "-" and Path(src).resolve() == resolved:
            raise CliError(f"refusing to overwrite input file {src}")
    return target


def _read_graph(path: str) -> WeightedDependencyGraph:
    if not os.path.exists(path):
        raise CliError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        return read_call_facts(fh, Granularity.CLASS, source=path)


def _write_graph(graph: WeightedDependencyGraph, path: Path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_call_facts(graph, fh)


# -- subcommands -------------------------------------------------------------

def cmd_extract_static(args) -> int:
    for p in args.paths:
        if not os.path.exists(p):
            raise CliError(f"no such file or directory: {p}")
    out = _out_path(args, args.output, args.paths)
    graph = extract_static_graph(iter_class_files(args.paths), _filter(args),
                                 inner_class_mode=_inner_mode(args))
    _write_graph(graph, out)
    print(f"{len(graph.nodes)} classes, {len(graph.edges)} edges, "
          f"{graph.total_weight} call sites -> {out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    for p in args.traces:
        if p != "-" and not os.path.exists(p):
            raise CliError(f"no such file: {p}")
    policy = ErrorPolicy.FAIL_FAST if args.error_policy == "fail-fast" else ErrorPolicy.SKIP_AND_COUNT
    graph_out = _out_path(args, args.output, args.traces)
    stats_out = _out_path(args, args.stats_output, args.traces)
    result = ingest_files(args.traces, _filter(args), policy, sep=SEPARATORS[args.separator],
                          inner_class_mode=_inner_mode(args), jobs=args.jobs)
    _write_graph(result.graph, graph_out)
    label = args.label or (Path(args.traces[0]).name if len(args.traces) == 1 else "dataset")
    with open(stats_out, "w", encoding="utf-8", newline="") as fh:
        write_stats_csv([(label, result.stats)], fh)
    s = result.stats
    print(f"{s.total_records} records, {s.inter_class_records} inter-class, "
          f"{s.distinct_classes} classes, {s.distinct_edges} edges -> {graph_out}")
    if result.malformed:
        print(f"skipped {result.malformed} malformed line(s) of {result.lines} "
              f"({result.malformed_ratio:.4%})", file=sys.stderr)
    if result.over_malformed_limit:
        print(f"error: malformed lines exceed {MALFORMED_LIMIT:.1%} of input", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def _load_pair(args):
    flt = _filter(args)
    static = _read_graph(args.static)
    dynamic = _read_graph(args.dynamic)
    if flt.include_prefixes or flt.exclude_prefixes:
        static, dynamic = static.restrict(flt), dynamic.restrict(flt)
    return static, dynamic


def cmd_degrees(args) -> int:
    static, dynamic = _load_pair(args)
    wanted = {"class": {Granularity.CLASS}, "package": {Granularity.PACKAGE},
              "both": set(Granularity)}[args.granularity]
    selectors = [s for s in ALL_SELECTORS if s.granularity in wanted]
    vectors = all_vectors(static, dynamic, selectors)
    inputs = (args.static, args.dynamic)
    with open(_out_path(args, "degrees.csv", inputs), "w", encoding="utf-8", newline="") as fh:
        write_degrees_csv(vectors, fh)
    with open(_out_path(args, "rankings.csv", inputs), "w", encoding="utf-8", newline="") as fh:
        write_rankings_csv([ranking(v) for v in vectors], fh)
    print(f"{len(vectors)} selectors -> {Path(args.out) / 'degrees.csv'}, "
          f"{Path(args.out) / 'rankings.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    static, dynamic = _load_pair(args)
    cells = comparison_suite(static, dynamic)
    inputs = (args.static, args.dynamic)
    with open(_out_path(args, "results.csv", inputs), "w", encoding="utf-8", newline="") as fh:
        write_results_csv(cells, fh)
    markdown = render_markdown(cells, title=args.title)
    with open(_out_path(args, "results.md", inputs), "w", encoding="utf-8", newline="") as fh:
        fh.write(markdown)
    sys.stdout.write(results_csv(cells) if args.format == "csv" else markdown)
    degenerate = [c for c in cells if not c.ok]
    if degenerate:
        print(f"warning: {len(degenerate)} degenerate cell(s) reported as n/a",
              file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not os.path.exists(args.config):
        raise CliError(f"no such file: {args.config}")
    scenario = load_scenario(args.config, seed=args.seed)
    trace = simulate_trace(scenario.static_graph, scenario.model)
    inputs = [args.config]
    trace_path = _out_path(args, scenario.trace_name, inputs)
    write_trace_file(trace, str(trace_path), SEPARATORS[args.separator])
    truth = trace.ground_truth
    _write_graph(truth, _out_path(args, "ground_truth.csv", inputs))
    if scenario.generated_static:
        _write_graph(scenario.static_graph, _out_path(args, "static.csv", inputs))
    total = scenario.model.total_calls
    stats = TraceStats(total, total, len(truth.nodes), len(truth.edges),
                       BASE_TIMESTAMP if total else None,
                       BASE_TIMESTAMP + total - 1 if total else None)
    with open(_out_path(args, "stats.csv", inputs), "w", encoding="utf-8", newline="") as fh:
        write_stats_csv([(Path(args.config).stem, stats)], fh)
    print(f"{total} records over {len(truth.edges)} edges -> {trace_path}")
    return EXIT_OK


def cmd_stats(args) -> int:
    labels = list(args.label or ())
    if labels and len(labels) != len(args.traces):
        raise CliError("--label must be given once per trace file or not at all")
    policy = ErrorPolicy.FAIL_FAST if args.error_policy == "fail-fast" else ErrorPolicy.SKIP_AND_COUNT
    rows = []
    status = EXIT_OK
    for i, path in enumerate(args.traces):
        if path != "-" and not os.path.exists(path):
            raise CliError(f"no such file: {path}")
        result = ingest_files([path], _filter(args), policy, sep=SEPARATORS[args.separator],
                              inner_class_mode=_inner_mode(args))
        if result.over_malformed_limit:
            print(f"error: {path}: malformed lines exceed {MALFORMED_LIMIT:.1%}", file=sys.stderr)
            status = EXIT_ERROR
        rows.append((labels[i] if labels else Path(path).name, result.stats))
    report = trace_stats_report(rows, "csv" if args.format == "csv" else "md")
    sys.stdout.write(report)
    if args.out:
        with open(_out_path(args, "stats.csv", args.traces), "w", encoding="utf-8",
                  newline="") as fh:
            write_stats_csv(rows, fh)
    return status


# -- parser ------------------------------------------------------------------

def _add_filter_flags(p):
    p.add_argument("--include", action="append", metavar="PREFIX",
                   help="only analyze classes starting with PREFIX (repeatable)")
    p.add_argument("--exclude", action="append", metavar="PREFIX",
                   help="drop classes starting with PREFIX (repeatable)")


def _add_trace_flags(p):
    p.add_argument("--separator", choices=sorted(SEPARATORS), default="semicolon",
                   help="record field separator (default: semicolon)")
    p.add_argument("--error-policy", choices=("fail-fast", "skip"), default="skip",
                   help="stop at the first malformed line, or skip and count (default)")


def _add_inner_flag(p):
    p.add_argument("--inner-classes", choices=("keep", "fold"), default="keep",
                   help="keep inner classes distinct (default) or fold into the outer class")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coupling-orders",
        description="Static vs. dynamic coupling metrics and Kendall-Tau comparison.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("extract-static", help="call facts from .class files, directories, jars")
    p.add_argument("paths", nargs="+")
    _add_filter_flags(p)
    _add_inner_flag(p)
    p.add_argument("--out", default=".", metavar="DIR")
    p.add_argument("--output", default="static.csv", help="file name inside --out")
    p.set_defaults(func=cmd_extract_static)

    p = sub.add_parser("ingest", help="weighted dynamic graph from trace files")
    p.add_argument("traces", nargs="+", help="trace files (gzip ok), '-' for stdin")
    _add_filter_flags(p)
    _add_trace_flags(p)
    _add_inner_flag(p)
    p.add_argument("--label", help="dataset label for the stats CSV")
    p.add_argument("--jobs", type=int, default=1, help="parse files in N worker processes")
    p.add_argument("--out", default=".", metavar="DIR")
    p.add_argument("--output", default="dynamic.csv", help="graph file name inside --out")
    p.add_argument("--stats-output", default="stats.csv", help="stats file name inside --out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("degrees", help="coupling degrees and rankings for the selectors")
    p.add_argument("static")
    p.add_argument("dynamic")
    _add_filter_flags(p)
    p.add_argument("--granularity", choices=("class", "package", "both"), default="both")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_degrees)

    p = sub.add_parser("compare", help="the 18 Kendall-Tau comparisons")
    p.add_argument("static")
    p.add_argument("dynamic")
    _add_filter_flags(p)
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--title", help="heading for the Markdown report")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="synthetic trace plus ground truth from a scenario file")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--separator", choices=sorted(SEPARATORS), default="semicolon")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="per-dataset trace statistics table")
    p.add_argument("traces", nargs="+")
    p.add_argument("--label", action="append", help="label per trace, in order (repeatable)")
    _add_filter_flags(p)
    _add_trace_flags(p)
    _add_inner_flag(p)
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--out", metavar="DIR", help="also write stats.csv here")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, CouplingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
