"""Streaming ingestion of monitoring traces into weighted class graphs.

A trace is a newline-delimited file of ``timestamp;caller;callee``
records, optionally gzip-compressed. Ingestion is a single pass whose
memory grows with the number of distinct (caller, callee) pairs, not with
the number of records.
"""

from __future__ import annotations

import contextlib
import csv
import enum
import gzip
import io
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple, Sequence

from .errors import InvalidNameError, TraceParseError
from .model import (
    ALL_IN_SCOPE, AnalysisFilter, Granularity, GraphBuilder, InnerClassMode,
    WeightedDependencyGraph, class_identity, merge, validate_class_name,
)

log = logging.getLogger(__name__)

__all__ = [
    "TraceRecord", "TraceStats", "ErrorPolicy", "IngestResult", "SEPARATORS",
    "parse_trace_record", "accumulate_trace", "open_trace", "ingest_files", "merge_results",
    "format_record", "trace_stats_report", "STATS_HEADER", "write_stats_csv",
    "MALFORMED_LIMIT",
]

SEPARATORS = {"semicolon": ";", "comma": ",", "tab": "\t"}

# fraction of malformed lines above which an ingest run counts as failed
MALFORMED_LIMIT = 0.001

GZIP_MAGIC = b"\x1f\x8b"


class ErrorPolicy(enum.Enum):
    FAIL_FAST = "fail-fast"
    SKIP_AND_COUNT = "skip-and-count"


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int
    caller: str
    callee: str


def format_record(rec: TraceRecord, sep: str = ";") -> str:
    return f"{rec.timestamp}{sep}{rec.caller}{sep}{rec.callee}"


@dataclass(frozen=True)
class TraceStats:
    total_records: int = 0
    inter_class_records: int = 0
    distinct_classes: int = 0
    distinct_edges: int = 0
    first_timestamp: int | None = None
    last_timestamp: int | None = None


class IngestResult(NamedTuple):
    graph: WeightedDependencyGraph
    stats: TraceStats
    malformed: int = 0
    lines: int = 0

    @property
    def malformed_ratio(self) -> float:
        return self.malformed / self.lines if self.lines else 0.0

    @property
    def over_malformed_limit(self) -> bool:
        return self.malformed_ratio > MALFORMED_LIMIT


def _clean_name(raw: str) -> str:
    return validate_class_name(raw.strip())


def parse_trace_record(line: str, lineno: int | None = None, sep: str = ";",
                       source: str | None = None) -> TraceRecord:
    parts = line.split(sep)
    if len(parts) != 3:
        raise TraceParseError(f"expected 3 fields, got {len(parts)}", lineno, source)
    try:
        ts = int(parts[0])
    except ValueError:
        raise TraceParseError(f"timestamp {parts[0].strip()!r} is not an integer",
                              lineno, source) from None
    try:
        return TraceRecord(ts, _clean_name(parts[1]), _clean_name(parts[2]))
    except InvalidNameError as exc:
        raise TraceParseError(str(exc), lineno, source) from None


class _Accumulator:
    """Per-pair tallies ``[count, min_ts, max_ts]`` keyed by the raw field text."""

    def __init__(self, sep=";", error_policy=ErrorPolicy.SKIP_AND_COUNT):
        self.sep = sep
        self.policy = error_policy
        self.table: dict[tuple[str, str], list[int]] = {}
        self.names: dict[tuple[str, str], tuple[str, str]] = {}
        self.bad: dict[tuple[str, str], str] = {}
        self.malformed = 0
        self.lines = 0

    def _error(self, exc: TraceParseError):
        if self.policy is ErrorPolicy.FAIL_FAST:
            raise exc
        self.malformed += 1
        if self.malformed <= 5:
            log.warning("skipping malformed record: %s", exc)

    def feed_lines(self, lines: Iterable[str], source: str | None = None):
        sep = self.sep
        table = self.table
        get = table.get
        seen = 0
        lineno = 0
        for lineno, line in enumerate(lines, 1):
            parts = line.split(sep)
            if len(parts) != 3:
                if line.strip():
                    seen += 1
                    self._error(TraceParseError(f"expected 3 fields, got {len(parts)}",
                                                lineno, source))
                continue
            seen += 1
            try:
                ts = int(parts[0])
            except ValueError:
                self._error(TraceParseError(
                    f"timestamp {parts[0].strip()!r} is not an integer", lineno, source))
                continue
            key = (parts[1], parts[2])
            rec = get(key)
            if rec is not None:
                rec[0] += 1
                if ts < rec[1]:
                    rec[1] = ts
                elif ts > rec[2]:
                    rec[2] = ts
                continue
            reason = self.bad.get(key)
            if reason is None:
                try:
                    self.names[key] = (_clean_name(key[0]), _clean_name(key[1]))
                except InvalidNameError as exc:
                    reason = self.bad[key] = str(exc)
            if reason is not None:
                self._error(TraceParseError(reason, lineno, source))
                continue
            table[key] = [1, ts, ts]
        self.lines += seen
        return lineno

    def feed_records(self, records: Iterable[TraceRecord]):
        table = self.table
        for rec in records:
            key = (rec.caller, rec.callee)
            entry = table.get(key)
            self.lines += 1
            if entry is None:
                self.names[key] = (_clean_name(rec.caller), _clean_name(rec.callee))
                table[key] = [1, rec.timestamp, rec.timestamp]
            else:
                entry[0] += 1
                entry[1] = min(entry[1], rec.timestamp)
                entry[2] = max(entry[2], rec.timestamp)

    def result(self, filter: AnalysisFilter, inner_class_mode: InnerClassMode) -> IngestResult:
        builder = GraphBuilder(Granularity.CLASS)
        total = inter = 0
        first = last = None
        for key, (count, lo, hi) in self.table.items():
            caller, callee = self.names[key]
            caller = class_identity(caller, inner_class_mode)
            callee = class_identity(callee, inner_class_mode)
            if not (filter.accepts(caller) and filter.accepts(callee)):
                continue
            total += count
            builder.add_node(caller)
            builder.add_node(callee)
            first = lo if first is None else min(first, lo)
            last = hi if last is None else max(last, hi)
            if caller != callee:
                inter += count
                builder.add(caller, callee, count)
        graph = builder.build()
        stats = TraceStats(total, inter, len(graph.nodes), len(graph.edges), first, last)
        return IngestResult(graph, stats, self.malformed, self.lines)


def accumulate_trace(records: Iterable[str | TraceRecord], filter: AnalysisFilter = ALL_IN_SCOPE,
                     error_policy: ErrorPolicy = ErrorPolicy.SKIP_AND_COUNT, *,
                     sep: str = ";",
                     inner_class_mode: InnerClassMode = InnerClassMode.KEEP_DISTINCT,
                     source: str | None = None) -> IngestResult:
    """Count in-scope inter-class calls in a stream of records or record lines.

    ``records`` may hold raw lines (parsed here, subject to
    ``error_policy``) or already-parsed :class:`TraceRecord` values. A
    record whose caller equals its callee counts toward ``total_records``
    but adds no edge.
    """
    acc = _Accumulator(sep, error_policy)
    it = iter(records)
    head = next(it, None)
    if head is not None:
        chained = itertools.chain((head,), it)
        if isinstance(head, TraceRecord):
            acc.feed_records(chained)
        else:
            acc.feed_lines(chained, source)
    return acc.result(filter, inner_class_mode)


@contextlib.contextmanager
def open_trace(path: str) -> Iterator[IO[str]]:
    """Open a trace for reading as text; gzip is detected by magic bytes, ``-`` is stdin."""
    if path == "-":
        raw = sys.stdin.buffer
        buffered = raw if hasattr(raw, "peek") else io.BufferedReader(raw)
        head = buffered.peek(2)[:2]
        if head == GZIP_MAGIC:
            stream = gzip.GzipFile(fileobj=buffered, mode="rb")
        else:
            stream = buffered
        text = io.TextIOWrapper(stream, encoding="utf-8", errors="replace", newline=None)
        try:
            yield text
        finally:
            text.detach()
        return
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == GZIP_MAGIC:
        fh = gzip.open(path, "rt", encoding="utf-8", errors="replace")
    else:
        fh = open(path, "r", encoding="utf-8", errors="replace")
    with fh:
        yield fh


def _ingest_one(path, filter, error_policy, sep, inner_class_mode) -> IngestResult:
    acc = _Accumulator(sep, error_policy)
    with open_trace(path) as fh:
        acc.feed_lines(fh, source=path)
    return acc.result(filter, inner_class_mode)


def merge_results(results: Sequence[IngestResult]) -> IngestResult:
    """Combine per-shard results; graph weights add, timestamps take min/max."""
    if not results:
        raise ValueError("merge_results needs at least one result")
    graph = merge(*(r.graph for r in results))
    firsts = [r.stats.first_timestamp for r in results if r.stats.first_timestamp is not None]
    lasts = [r.stats.last_timestamp for r in results if r.stats.last_timestamp is not None]
    stats = TraceStats(
        sum(r.stats.total_records for r in results),
        sum(r.stats.inter_class_records for r in results),
        len(graph.nodes), len(graph.edges),
        min(firsts) if firsts else None, max(lasts) if lasts else None)
    return IngestResult(graph, stats, sum(r.malformed for r in results),
                        sum(r.lines for r in results))


def ingest_files(paths: Sequence[str], filter: AnalysisFilter = ALL_IN_SCOPE,
                 error_policy: ErrorPolicy = ErrorPolicy.SKIP_AND_COUNT, *,
                 sep: str = ";",
                 inner_class_mode: InnerClassMode = InnerClassMode.KEEP_DISTINCT,
                 jobs: int = 1) -> IngestResult:
    """Ingest several trace files as one dataset.

    With ``jobs > 1`` files are parsed in worker processes and the partial
    results merged; the outcome is identical to a sequential run.
    """
    args = (filter, error_policy, sep, inner_class_mode)
    if jobs > 1 and len(paths) > 1 and "-" not in paths:
        with ProcessPoolExecutor(max_workers=min(jobs, len(paths))) as pool:
            results = list(pool.map(_ingest_one, paths, *(itertools.repeat(a) for a in args)))
        return merge_results(results)
    acc = _Accumulator(sep, error_policy)
    for path in paths:
        with open_trace(path) as fh:
            acc.feed_lines(fh, source=path)
    return acc.result(filter, inner_class_mode)


# -- reporting --------------------------------------------------------------

STATS_HEADER = ("label", "total_records", "inter_class_records", "distinct_classes",
                "distinct_edges", "first_ts", "last_ts")


def _stats_row(label: str, s: TraceStats) -> list:
    return [label, s.total_records, s.inter_class_records, s.distinct_classes,
            s.distinct_edges,
            "" if s.first_timestamp is None else s.first_timestamp,
            "" if s.last_timestamp is None else s.last_timestamp]


def write_stats_csv(rows: Sequence[tuple[str, TraceStats]], fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for label, stats in rows:
        writer.writerow(_stats_row(label, stats))


def trace_stats_report(rows: Sequence[tuple[str, TraceStats]], fmt: str = "md") -> str:
    """One row per dataset, in input order: number, label, method calls, ..."""
    if not rows:
        raise ValueError("trace_stats_report needs at least one dataset")
    if fmt == "csv":
        buf = io.StringIO()
        write_stats_csv(rows, buf)
        return buf.getvalue()
    header = ["#", "label", "method calls", "inter-class calls", "classes", "edges"]
    body = [[str(i), label, str(s.total_records), str(s.inter_class_records),
             str(s.distinct_classes), str(s.distinct_edges)]
            for i, (label, s) in enumerate(rows, 1)]
    widths = [max(len(r[c]) for r in [header, *body]) for c in range(len(header))]
    right = {0, 2, 3, 4, 5}

    def fmt_row(cells):
        out = [c.rjust(w) if i in right else c.ljust(w)
               for i, (c, w) in enumerate(zip(cells, widths))]
        return "| " + " | ".join(out) + " |"

    rule = "|" + "|".join(("-" * (w + 1) + ":") if i in right else ("-" * (w + 2))
                          for i, w in enumerate(widths)) + "|"
    return "\n".join([fmt_row(header), rule, *map(fmt_row, body)]) + "\n"
