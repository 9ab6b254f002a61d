"""Coupling degrees for the 18 selectors and the coupling orders they induce."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Mapping

from .errors import GranularityError
from .model import (
    ALL_SELECTORS, Approach, CouplingSelector, Direction, Granularity,
    WeightedDependencyGraph, lift_to_packages, unweight,
)

__all__ = [
    "CouplingVector", "CouplingRanking", "GraphCache",
    "build_graph_for", "coupling_vector", "ranking", "all_vectors",
    "write_degrees_csv", "write_rankings_csv",
]


def _require_class_level(*graphs: WeightedDependencyGraph):
    for g in graphs:
        if g.granularity is not Granularity.CLASS:
            raise GranularityError("static and dynamic inputs must be class-level graphs")


def build_graph_for(selector: CouplingSelector, static_class_graph: WeightedDependencyGraph,
                    dynamic_class_graph: WeightedDependencyGraph) -> WeightedDependencyGraph:
    """The graph whose degrees define ``selector``'s coupling measure.

    Package lifting runs on the weighted class graph before unweighting,
    so package-level unweighted degrees count distinct partner packages.
    """
    _require_class_level(static_class_graph, dynamic_class_graph)
    g = static_class_graph if selector.approach is Approach.STATIC else dynamic_class_graph
    if selector.granularity is Granularity.PACKAGE:
        g = lift_to_packages(g)
    if not selector.approach.is_weighted:
        g = unweight(g)
    return g


class GraphCache:
    """Memoizes the six (granularity, approach) graphs for one static/dynamic pair."""

    def __init__(self, static_class_graph, dynamic_class_graph):
        _require_class_level(static_class_graph, dynamic_class_graph)
        self.static = static_class_graph
        self.dynamic = dynamic_class_graph
        self._lifted = {}
        self._graphs = {}

    def _base(self, granularity: Granularity, dynamic: bool):
        key = (granularity, dynamic)
        if key not in self._lifted:
            g = self.dynamic if dynamic else self.static
            if granularity is Granularity.PACKAGE:
                g = lift_to_packages(g)
            self._lifted[key] = g
        return self._lifted[key]

    def graph(self, granularity: Granularity, approach: Approach) -> WeightedDependencyGraph:
        key = (granularity, approach)
        if key not in self._graphs:
            g = self._base(granularity, approach is not Approach.STATIC)
            if not approach.is_weighted:
                g = unweight(g)
            self._graphs[key] = g
        return self._graphs[key]

    def nodes(self, granularity: Granularity, dynamic: bool) -> frozenset:
        return self._base(granularity, dynamic).nodes


@dataclass(frozen=True)
class CouplingVector:
    selector: CouplingSelector
    degrees: Mapping[str, int]

    def __getitem__(self, module: str) -> int:
        return self.degrees[module]

    def __len__(self):
        return len(self.degrees)

    def restrict(self, modules: Iterable[str]) -> "CouplingVector":
        return CouplingVector(self.selector, {m: self.degrees[m] for m in modules})


def _degrees(g: WeightedDependencyGraph, direction: Direction) -> dict[str, int]:
    if direction is Direction.IMPORT:
        return dict(g.out_weights())
    if direction is Direction.EXPORT:
        return dict(g.in_weights())
    out, inn = g.out_weights(), g.in_weights()
    return {m: out[m] + inn[m] for m in g.nodes}


def coupling_vector(selector: CouplingSelector, static_class_graph: WeightedDependencyGraph,
                    dynamic_class_graph: WeightedDependencyGraph, *,
                    cache: GraphCache | None = None) -> CouplingVector:
    """Coupling degree of every module of the selector's graph.

    Import coupling is the out-weight, export coupling the in-weight,
    combined coupling their sum.
    """
    if cache is not None:
        g = cache.graph(selector.granularity, selector.approach)
    else:
        g = build_graph_for(selector, static_class_graph, dynamic_class_graph)
    return CouplingVector(selector, _degrees(g, selector.direction))


def all_vectors(static_class_graph, dynamic_class_graph,
                selectors: Iterable[CouplingSelector] = ALL_SELECTORS) -> list[CouplingVector]:
    cache = GraphCache(static_class_graph, dynamic_class_graph)
    return [coupling_vector(s, static_class_graph, dynamic_class_graph, cache=cache)
            for s in selectors]


@dataclass(frozen=True)
class CouplingRanking:
    """Modules grouped by equal degree, highest degree first."""

    selector: CouplingSelector | None
    groups: tuple[tuple[int, frozenset[str]], ...]

    @property
    def modules(self) -> frozenset[str]:
        return frozenset().union(*(members for _, members in self.groups))

    def positions(self) -> dict[str, int]:
        """Module -> group index (0 = most coupled). Tied modules share an index."""
        return {m: i for i, (_, members) in enumerate(self.groups) for m in members}

    def __len__(self):
        return sum(len(members) for _, members in self.groups)


def ranking(v: CouplingVector) -> CouplingRanking:
    by_degree: dict[int, set[str]] = {}
    for module, degree in v.degrees.items():
        by_degree.setdefault(degree, set()).add(module)
    groups = tuple((d, frozenset(by_degree[d])) for d in sorted(by_degree, reverse=True))
    return CouplingRanking(v.selector, groups)


def write_degrees_csv(vectors: Iterable[CouplingVector], fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(("selector", "module", "degree"))
    for v in vectors:
        for module in sorted(v.degrees):
            writer.writerow((v.selector.code, module, v.degrees[module]))


def write_rankings_csv(rankings: Iterable[CouplingRanking], fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(("selector", "rank_group", "degree", "module"))
    for r in rankings:
        code = r.selector.code if r.selector else ""
        for i, (degree, members) in enumerate(r.groups, 1):
            for module in sorted(members):
                writer.writerow((code, i, degree, module))
