"""Synthetic monitoring traces with known ground truth.

Records are drawn from the edge set of a static class graph. The draw is
reproducible from the seed, and the exact per-edge counts of what was
emitted are returned alongside as the ground-truth dynamic graph.
"""

from __future__ import annotations

import enum
import gzip
import itertools
import random
from dataclasses import dataclass, field
from typing import IO, Iterator, Mapping

import numpy as np

from .errors import ScenarioError
from .model import Granularity, GraphBuilder, WeightedDependencyGraph
from .traces import TraceRecord, accumulate_trace

__all__ = [
    "ModelKind", "Coverage", "FrequencyModel", "SimulatedTrace",
    "simulate_trace", "replay_check", "random_static_graph", "skew_scenario",
    "write_trace", "write_trace_file", "BASE_TIMESTAMP",
]

# 2017-02-13T16:53:20Z in nanoseconds; only monotonicity matters.
BASE_TIMESTAMP = 1_487_004_800_000_000_000

_CHUNK = 1 << 16


class ModelKind(enum.Enum):
    UNIFORM = "uniform"
    ZIPF = "zipf"
    EXPLICIT = "explicit"


class Coverage(enum.Enum):
    ALL_EDGES = "all-edges-at-least-once"
    FREE = "free"


@dataclass(frozen=True)
class FrequencyModel:
    kind: ModelKind = ModelKind.UNIFORM
    total_calls: int = 1000
    seed: int = 0
    coverage: Coverage = Coverage.FREE
    zipf_s: float = 1.0
    explicit: Mapping[tuple[str, str], int] = field(default_factory=dict)
    # explicit only: emit exact proportional counts instead of sampling
    proportional: bool = False

    def __post_init__(self):
        if self.total_calls < 0:
            raise ScenarioError("total_calls must be non-negative")
        if self.kind is ModelKind.ZIPF and not self.zipf_s > 0:
            raise ScenarioError("zipf exponent must be > 0")
        if self.kind is ModelKind.EXPLICIT:
            if not self.explicit:
                raise ScenarioError("explicit model needs at least one edge weight")
            if any(w <= 0 for w in self.explicit.values()):
                raise ScenarioError("explicit weights must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ScenarioError("seed must be a 64-bit unsigned integer")


class SimulatedTrace:
    """A replayable synthetic trace.

    Iterating yields :class:`TraceRecord` values; every iteration produces
    the same sequence. ``ground_truth`` is the exact edge multiset.
    """

    def __init__(self, edges: list[tuple[str, str]], model: FrequencyModel,
                 counts: np.ndarray | None, probs: np.ndarray | None, order: np.ndarray | None):
        self.edges = edges
        self.model = model
        self._counts = counts
        self._probs = probs
        self._order = order
        self._truth: WeightedDependencyGraph | None = None

    def __len__(self):
        return self.model.total_calls

    def _index_chunks(self) -> Iterator[np.ndarray]:
        m = self.model
        remaining = m.total_calls
        if self._order is not None:
            # proportional emission: a seeded permutation of the exact multiset
            for start in range(0, len(self._order), _CHUNK):
                yield self._order[start:start + _CHUNK]
            return
        if m.coverage is Coverage.ALL_EDGES and self.edges:
            cover = np.arange(len(self.edges))
            yield cover
            remaining -= len(cover)
        rng = np.random.Generator(np.random.PCG64(m.seed))
        n = len(self.edges)
        while remaining > 0:
            size = min(_CHUNK, remaining)
            if self._probs is None:
                yield rng.integers(0, n, size=size)
            else:
                yield rng.choice(n, size=size, p=self._probs)
            remaining -= size

    def __iter__(self) -> Iterator[TraceRecord]:
        ts = BASE_TIMESTAMP
        edges = self.edges
        for chunk in self._index_chunks():
            for idx in chunk.tolist():
                caller, callee = edges[idx]
                yield TraceRecord(ts, caller, callee)
                ts += 1

    def lines(self, sep: str = ";") -> Iterator[str]:
        """Trace-file lines (with newline), built in bulk for speed."""
        ts = BASE_TIMESTAMP
        encoded = [f"{sep}{a}{sep}{b}\n" for a, b in self.edges]
        for chunk in self._index_chunks():
            idx = chunk.tolist()
            yield "".join(f"{ts + k}{encoded[i]}" for k, i in enumerate(idx))
            ts += len(idx)

    @property
    def ground_truth(self) -> WeightedDependencyGraph:
        if self._truth is None:
            counts = np.zeros(len(self.edges), dtype=np.int64)
            for chunk in self._index_chunks():
                counts += np.bincount(chunk, minlength=len(self.edges))
            builder = GraphBuilder(Granularity.CLASS)
            for (a, b), c in zip(self.edges, counts.tolist()):
                if c:
                    builder.add(a, b, c)
            self._truth = builder.build()
        return self._truth


def _proportional_counts(weights: list[int], total: int) -> list[int]:
    """Largest-remainder apportionment; exact when ``total`` divides evenly."""
    wsum = sum(weights)
    quotas = [w * total for w in weights]
    counts = [q // wsum for q in quotas]
    short = total - sum(counts)
    by_remainder = sorted(range(len(weights)), key=lambda i: (-(quotas[i] % wsum), i))
    for i in by_remainder[:short]:
        counts[i] += 1
    return counts


def simulate_trace(static_graph: WeightedDependencyGraph, model: FrequencyModel) -> SimulatedTrace:
    """Build a reproducible trace over the edges of ``static_graph``."""
    edges = sorted(static_graph.edges)
    if model.kind is ModelKind.EXPLICIT:
        unknown = [e for e in model.explicit if e not in static_graph.edges]
        if unknown:
            raise ScenarioError(f"explicit weights name edges not in the static graph: {unknown[:3]}")
        edges = sorted(model.explicit)
    if model.total_calls > 0 and not edges:
        raise ScenarioError("cannot emit calls from a graph without edges")
    if model.coverage is Coverage.ALL_EDGES and model.total_calls < len(edges):
        raise ScenarioError(
            f"total_calls={model.total_calls} is below the edge count {len(edges)} "
            "required by all-edges-at-least-once")

    probs = order = None
    if model.kind is ModelKind.EXPLICIT and model.proportional:
        weights = [model.explicit[e] for e in edges]
        base = np.zeros(len(edges), dtype=np.int64)
        total = model.total_calls
        if model.coverage is Coverage.ALL_EDGES:
            base += 1
            total -= len(edges)
        counts = base + np.asarray(_proportional_counts(weights, total), dtype=np.int64)
        order = np.repeat(np.arange(len(edges)), counts)
        np.random.Generator(np.random.PCG64(model.seed)).shuffle(order)
        return SimulatedTrace(edges, model, counts, None, order)
    if model.kind is ModelKind.ZIPF:
        # rank edges by a seeded shuffle; probability falls off as rank^-s
        ranked = list(range(len(edges)))
        random.Random(model.seed).shuffle(ranked)
        p = np.empty(len(edges))
        for rank, idx in enumerate(ranked, 1):
            p[idx] = rank ** -model.zipf_s
        probs = p / p.sum()
    elif model.kind is ModelKind.EXPLICIT:
        w = np.asarray([model.explicit[e] for e in edges], dtype=float)
        probs = w / w.sum()
    return SimulatedTrace(edges, model, None, probs, order)


def replay_check(trace, ground_truth: WeightedDependencyGraph) -> bool:
    """True iff ingesting ``trace`` reproduces ``ground_truth`` edge for edge."""
    replayed = accumulate_trace(iter(trace)).graph
    return dict(replayed.edges) == dict(ground_truth.edges)


def write_trace(trace: SimulatedTrace, fp: IO[str], sep: str = ";") -> None:
    for block in trace.lines(sep):
        fp.write(block)


def write_trace_file(trace: SimulatedTrace, path: str, sep: str = ";", compress: bool | None = None):
    if compress is None:
        compress = str(path).endswith(".gz")
    if compress:
        # mtime=0 keeps the gzip header free of wall-clock time
        with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw,
                                                    compresslevel=1, mtime=0) as gz:
            for block in trace.lines(sep):
                gz.write(block.encode("utf-8"))
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            write_trace(trace, fp, sep)


# -- ready-made static graphs ----------------------------------------------

def _class_name(i: int, packages: int) -> str:
    return f"sim.p{i % packages:02d}.C{i:04d}"


def random_static_graph(nodes: int, density: float = 0.1, seed: int = 0,
                        packages: int = 5) -> WeightedDependencyGraph:
    """Erdos-Renyi style class graph; weights are random call-site counts in 1..3."""
    rng = random.Random(seed)
    builder = GraphBuilder(Granularity.CLASS)
    names = [_class_name(i, packages) for i in range(nodes)]
    for name in names:
        builder.add_node(name)
    for a, b in itertools.permutations(names, 2):
        if rng.random() < density:
            builder.add(a, b, rng.randint(1, 3))
    return builder.build()


def skew_scenario(n: int = 20) -> tuple[WeightedDependencyGraph, dict[tuple[str, str], int]]:
    """Static graph plus explicit weights whose weighted order inverts the static one.

    Modules ``0..n-1`` start from the complete digraph; arcs ``i -> j`` with
    ``i < j`` and ``i + j >= n - 1`` are removed, so static combined degree
    falls with the index (one tie in the middle for even ``n``). Every
    arc keeps weight 1 except ``(n-1) -> k``, which gets ``1 + 3k``; the
    weighted degree of module ``k`` is then its static degree plus ``3k``
    (and far more for the hub), which rises strictly with the index.
    """
    if n < 3:
        raise ScenarioError("skew scenario needs at least 3 modules")
    names = [f"skew.m{i:02d}.Module" for i in range(n)]
    builder = GraphBuilder(Granularity.CLASS)
    weights: dict[tuple[str, str], int] = {}
    hub = n - 1
    for i, j in itertools.permutations(range(n), 2):
        if i < j and i + j >= n - 1:
            continue
        builder.add(names[i], names[j])
        weights[(names[i], names[j])] = 1 + 3 * j if i == hub else 1
    return builder.build(), weights
