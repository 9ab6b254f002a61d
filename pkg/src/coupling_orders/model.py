"""Core domain types: module names, weighted dependency graphs and selectors.

A :class:`WeightedDependencyGraph` is the single substrate every analysis
works on. Module ids are plain strings; the graph's ``granularity`` says
whether they are class names or package names, and a graph never mixes the
two.
"""

from __future__ import annotations

import csv
import enum
import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping

from .errors import GranularityError, GraphError, InvalidNameError

__all__ = [
    "Granularity", "Approach", "Direction", "InnerClassMode",
    "CouplingSelector", "ALL_SELECTORS",
    "AnalysisFilter", "WeightedDependencyGraph", "GraphBuilder",
    "validate_class_name", "package_of", "class_identity",
    "lift_to_packages", "unweight", "merge",
    "CALL_FACTS_HEADER", "write_call_facts", "read_call_facts",
]

_RESERVED = re.compile(r"[\s,]")


class Granularity(enum.Enum):
    CLASS = "c"
    PACKAGE = "p"

    @property
    def label(self) -> str:
        return self.name.lower()


class Approach(enum.Enum):
    STATIC = "s"
    UNWEIGHTED = "u"
    WEIGHTED = "w"

    @property
    def is_weighted(self) -> bool:
        return self is Approach.WEIGHTED


class Direction(enum.Enum):
    IMPORT = "i"
    EXPORT = "e"
    COMBINED = "c"

    @property
    def label(self) -> str:
        return self.name.lower()


class InnerClassMode(enum.Enum):
    KEEP_DISTINCT = "keep-distinct"
    FOLD_INTO_OUTER = "fold-into-outer"


@dataclass(frozen=True, order=True)
class CouplingSelector:
    """The triple picking one of the 18 coupling measures."""

    granularity: Granularity
    approach: Approach
    direction: Direction

    @property
    def code(self) -> str:
        return f"{self.granularity.value}{self.approach.value}{self.direction.value}"

    @classmethod
    def parse(cls, code: str) -> "CouplingSelector":
        text = code.replace(",", "").replace(":", "").strip()
        if len(text) != 3:
            raise ValueError(f"bad selector {code!r}; expected e.g. 'cwi'")
        g, a, d = text
        return cls(Granularity(g), Approach(a), Direction(d))

    def __str__(self):
        return self.code


ALL_SELECTORS: tuple[CouplingSelector, ...] = tuple(
    CouplingSelector(g, a, d)
    for g, a, d in itertools.product(Granularity, Approach, Direction)
)


def validate_class_name(name: str) -> str:
    if not name:
        raise InvalidNameError("class name must be non-empty")
    if _RESERVED.search(name):
        raise InvalidNameError(f"class name {name!r} contains whitespace or a comma")
    return name


def _validate_package_name(name: str) -> str:
    if _RESERVED.search(name):
        raise InvalidNameError(f"package name {name!r} contains whitespace or a comma")
    return name


def package_of(name: str, inner_class_mode: InnerClassMode = InnerClassMode.KEEP_DISTINCT) -> str:
    """Package of a dotted class name; ``""`` is the default package.

    ``inner_class_mode`` is accepted for symmetry with :func:`class_identity`
    but never changes the result: ``$`` is not a package separator.
    """
    return name.rpartition(".")[0]


def class_identity(name: str, inner_class_mode: InnerClassMode) -> str:
    """Class id used for graph nodes under the given inner-class policy."""
    if inner_class_mode is InnerClassMode.FOLD_INTO_OUTER:
        pkg, dot, simple = name.rpartition(".")
        outer = simple.split("$", 1)[0]
        if outer:
            return f"{pkg}{dot}{outer}"
    return name


@dataclass(frozen=True)
class AnalysisFilter:
    """Prefix-based scope shared by the static and dynamic pipelines.

    A class is in scope iff it starts with some include prefix (or there
    are none) and with no exclude prefix.
    """

    include_prefixes: tuple[str, ...] = ()
    exclude_prefixes: tuple[str, ...] = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "include_prefixes", tuple(self.include_prefixes))
        object.__setattr__(self, "exclude_prefixes", tuple(self.exclude_prefixes))

    def accepts(self, name: str) -> bool:
        hit = self._cache.get(name)
        if hit is None:
            hit = (not self.include_prefixes or name.startswith(self.include_prefixes)) and not (
                self.exclude_prefixes and name.startswith(self.exclude_prefixes)
            )
            self._cache[name] = hit
        return hit

    __call__ = accepts


ALL_IN_SCOPE = AnalysisFilter()


class WeightedDependencyGraph:
    """Immutable directed graph with positive integer edge weights.

    ``edges`` maps ``(caller, callee)`` to the number of interactions.
    ``nodes`` always contains every edge endpoint and may hold isolated
    modules as well.
    """

    __slots__ = ("granularity", "edges", "nodes", "_out", "_in")

    def __init__(self, granularity: Granularity, edges: Mapping[tuple[str, str], int] = (),
                 nodes: Iterable[str] = ()):
        edges = dict(edges)
        node_set = set(nodes)
        check = validate_class_name if granularity is Granularity.CLASS else _validate_package_name
        for (a, b), w in edges.items():
            if a == b:
                raise GraphError(f"self-loop on {a!r} is not allowed")
            if not isinstance(w, int) or isinstance(w, bool) or w < 1:
                raise GraphError(f"edge {a}->{b} has non-positive weight {w!r}")
            node_set.add(a)
            node_set.add(b)
        for n in node_set:
            check(n)
        object.__setattr__(self, "granularity", granularity)
        object.__setattr__(self, "edges", MappingProxyType(edges))
        object.__setattr__(self, "nodes", frozenset(node_set))
        object.__setattr__(self, "_out", None)
        object.__setattr__(self, "_in", None)

    def __setattr__(self, key, value):
        raise AttributeError("WeightedDependencyGraph is immutable")

    def __reduce__(self):
        return (type(self), (self.granularity, dict(self.edges), self.nodes))

    @classmethod
    def empty(cls, granularity: Granularity = Granularity.CLASS) -> "WeightedDependencyGraph":
        return cls(granularity)

    def __eq__(self, other):
        if not isinstance(other, WeightedDependencyGraph):
            return NotImplemented
        return (self.granularity is other.granularity and self.nodes == other.nodes
                and dict(self.edges) == dict(other.edges))

    __hash__ = None

    def __repr__(self):
        return (f"WeightedDependencyGraph({self.granularity.label}, "
                f"{len(self.nodes)} nodes, {len(self.edges)} edges, weight={self.total_weight})")

    def __len__(self):
        return len(self.edges)

    def weight(self, caller: str, callee: str) -> int:
        return self.edges.get((caller, callee), 0)

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())

    def out_weights(self) -> Mapping[str, int]:
        """Sum of outgoing weights per node (0 for nodes without out-edges)."""
        if self._out is None:
            self._compute_degrees()
        return self._out

    def in_weights(self) -> Mapping[str, int]:
        if self._in is None:
            self._compute_degrees()
        return self._in

    def _compute_degrees(self):
        out = dict.fromkeys(self.nodes, 0)
        inn = dict.fromkeys(self.nodes, 0)
        for (a, b), w in self.edges.items():
            out[a] += w
            inn[b] += w
        object.__setattr__(self, "_out", MappingProxyType(out))
        object.__setattr__(self, "_in", MappingProxyType(inn))

    def sorted_edges(self) -> list[tuple[str, str, int]]:
        return [(a, b, w) for (a, b), w in sorted(self.edges.items())]

    def restrict(self, keep) -> "WeightedDependencyGraph":
        """Subgraph induced by the nodes for which ``keep(node)`` is true."""
        nodes = {n for n in self.nodes if keep(n)}
        edges = {e: w for e, w in self.edges.items() if e[0] in nodes and e[1] in nodes}
        return WeightedDependencyGraph(self.granularity, edges, nodes)


class GraphBuilder:
    """Mutable accumulator; additions commute, so any interleaving gives the same graph."""

    def __init__(self, granularity: Granularity = Granularity.CLASS):
        self.granularity = granularity
        self._edges: Counter = Counter()
        self._nodes: set[str] = set()

    def add(self, caller: str, callee: str, count: int = 1) -> None:
        if caller == callee:
            raise GraphError(f"self-loop on {caller!r} is not allowed")
        if count < 1:
            raise GraphError(f"edge {caller}->{callee} has non-positive weight {count!r}")
        self._edges[(caller, callee)] += count

    def add_node(self, name: str) -> None:
        self._nodes.add(name)

    def update(self, graph: WeightedDependencyGraph) -> None:
        if graph.granularity is not self.granularity:
            raise GranularityError(
                f"cannot merge {graph.granularity.label}-level graph into "
                f"{self.granularity.label}-level graph")
        self._edges.update(graph.edges)
        self._nodes.update(graph.nodes)

    def build(self) -> WeightedDependencyGraph:
        return WeightedDependencyGraph(self.granularity, self._edges, self._nodes)


def lift_to_packages(g: WeightedDependencyGraph) -> WeightedDependencyGraph:
    """Sum class-level weights per package pair, dropping intra-package edges."""
    if g.granularity is not Granularity.CLASS:
        raise GranularityError("lift_to_packages expects a class-level graph")
    pkg = {n: package_of(n) for n in g.nodes}
    edges: Counter = Counter()
    for (a, b), w in g.edges.items():
        p, q = pkg[a], pkg[b]
        if p != q:
            edges[(p, q)] += w
    return WeightedDependencyGraph(Granularity.PACKAGE, edges, pkg.values())


def unweight(g: WeightedDependencyGraph) -> WeightedDependencyGraph:
    return WeightedDependencyGraph(g.granularity, dict.fromkeys(g.edges, 1), g.nodes)


def merge(*graphs: WeightedDependencyGraph) -> WeightedDependencyGraph:
    """Node union and edge-wise weight sum of graphs with equal granularity."""
    if not graphs:
        raise ValueError("merge needs at least one graph")
    builder = GraphBuilder(graphs[0].granularity)
    for g in graphs:
        builder.update(g)
    return builder.build()


# -- call-facts CSV ---------------------------------------------------------

CALL_FACTS_HEADER = ("caller", "callee", "count")


def _call_fact_rows(g: WeightedDependencyGraph) -> Iterator[tuple[str, str, int]]:
    # Isolated nodes are persisted as "name,,0" so round trips keep the node set.
    connected = {a for a, _ in g.edges} | {b for _, b in g.edges}
    rows = [(a, b, w) for (a, b), w in g.edges.items()]
    rows.extend((n, "", 0) for n in g.nodes - connected)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return iter(rows)


def write_call_facts(g: WeightedDependencyGraph, fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(CALL_FACTS_HEADER)
    writer.writerows(_call_fact_rows(g))


def read_call_facts(fp: IO[str], granularity: Granularity = Granularity.CLASS,
                    source: str | None = None) -> WeightedDependencyGraph:
    where = f"{source}: " if source else ""
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CALL_FACTS_HEADER:
        raise GraphError(f"{where}missing call-facts header 'caller,callee,count'")
    builder = GraphBuilder(granularity)
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise GraphError(f"{where}line {lineno}: expected 3 fields, got {len(row)}")
        caller, callee, count = row
        try:
            n = int(count)
        except ValueError:
            raise GraphError(f"{where}line {lineno}: count {count!r} is not an integer") from None
        if n == 0 and callee == "":
            builder.add_node(caller)
            continue
        try:
            builder.add(caller, callee, n)
        except GraphError as exc:
            raise GraphError(f"{where}line {lineno}: {exc}") from None
    try:
        return builder.build()
    except InvalidNameError as exc:
        raise GraphError(f"{where}{exc}") from None
