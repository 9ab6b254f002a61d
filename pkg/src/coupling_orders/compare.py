"""Kendall-Tau comparison of coupling orders.

Tie convention: a pair tied in either ranking is neither concordant nor
discordant, and the distance is still normalized by all n(n-1)/2 pairs.
This is *not* tau-b; it keeps distance 0 reachable exactly when no pair
is ordered oppositely. The z-score uses the no-ties null variance and is
therefore uncorrected for ties.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import mpmath

from .errors import DegenerateComparisonError
from .metrics import CouplingRanking, GraphCache, coupling_vector, ranking
from .model import (
    Approach, CouplingSelector, Direction, Granularity, WeightedDependencyGraph,
    lift_to_packages,
)

__all__ = [
    "ComparisonSpec", "ComparisonResult", "SuiteCell", "PairCounts", "ALL_SPECS", "PAIRINGS",
    "common_modules", "count_pairs", "count_inversions", "kendall_tau_distance",
    "z_score", "p_value", "comparison_suite",
]

PAIRINGS = (
    (Approach.STATIC, Approach.UNWEIGHTED),
    (Approach.STATIC, Approach.WEIGHTED),
    (Approach.UNWEIGHTED, Approach.WEIGHTED),
)


@dataclass(frozen=True)
class ComparisonSpec:
    """One cell of the result table: granularity, LHS vs RHS approach, direction."""

    granularity: Granularity
    lhs: Approach
    rhs: Approach
    direction: Direction

    def __post_init__(self):
        if (self.lhs, self.rhs) not in PAIRINGS:
            raise ValueError(f"unsupported pairing {self.lhs.value} vs {self.rhs.value}")

    @property
    def row_label(self) -> str:
        return f"<{self.granularity.value}: {self.lhs.value} vs {self.rhs.value}>"

    @property
    def lhs_selector(self) -> CouplingSelector:
        return CouplingSelector(self.granularity, self.lhs, self.direction)

    @property
    def rhs_selector(self) -> CouplingSelector:
        return CouplingSelector(self.granularity, self.rhs, self.direction)


# row-major: rows <alpha: b1 vs b2>, columns import/export/combined
ALL_SPECS: tuple[ComparisonSpec, ...] = tuple(
    ComparisonSpec(g, lhs, rhs, d)
    for g in Granularity
    for lhs, rhs in PAIRINGS
    for d in Direction
)


@dataclass(frozen=True)
class PairCounts:
    n: int
    concordant: int
    discordant: int
    tied: int

    @property
    def pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def distance(self) -> float:
        return self.discordant / self.pairs


@dataclass(frozen=True)
class ComparisonResult:
    spec: ComparisonSpec
    n: int
    concordant: int
    discordant: int
    tied_pairs: int
    tau_distance: float
    z_score: float
    p_value: float


@dataclass(frozen=True)
class SuiteCell:
    """A suite entry: either a result or the reason the cell is degenerate."""

    spec: ComparisonSpec
    result: ComparisonResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def common_modules(g_static: WeightedDependencyGraph, g_dynamic: WeightedDependencyGraph,
                   granularity: Granularity) -> frozenset[str]:
    """Modules present in both class-level graphs, lifted to packages if asked."""
    if granularity is Granularity.PACKAGE:
        return lift_to_packages(g_static).nodes & lift_to_packages(g_dynamic).nodes
    return g_static.nodes & g_dynamic.nodes


def count_inversions(seq: Sequence[int]) -> int:
    """Number of index pairs i < j with seq[i] > seq[j], by bottom-up merge sort."""
    a = list(seq)
    n = len(a)
    buf = [0] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            if mid >= hi or a[mid - 1] <= a[mid]:
                buf[lo:hi] = a[lo:hi]
                continue
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[j] < a[i]:
                    buf[k] = a[j]
                    inversions += mid - i
                    j += 1
                else:
                    buf[k] = a[i]
                    i += 1
                k += 1
            if i < mid:
                buf[k:hi] = a[i:mid]
            else:
                buf[k:hi] = a[j:hi]
        a, buf = buf, a
        width *= 2
    return inversions


def _tied_pairs(values: Iterable) -> int:
    return sum(t * (t - 1) // 2 for t in _run_lengths(sorted(values)))


def _run_lengths(sorted_values) -> Iterator[int]:
    for _, grp in itertools.groupby(sorted_values):
        yield sum(1 for _ in grp)


def count_pairs(x: Sequence, y: Sequence) -> PairCounts:
    """Concordant/discordant/tied pair counts in O(n log n).

    Sorting by (x, y) leaves every strict inversion of the y sequence a
    pair ordered oppositely by x and y; pairs tied on x are ordered by y
    and so never counted.
    """
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    n = len(x)
    pairs = sorted(zip(x, y))
    tied_x = _tied_pairs(p[0] for p in pairs)
    tied_y = _tied_pairs(y)
    tied_both = sum(t * (t - 1) // 2 for t in _run_lengths(pairs))
    discordant = count_inversions([p[1] for p in pairs])
    tied = tied_x + tied_y - tied_both
    concordant = n * (n - 1) // 2 - tied - discordant
    return PairCounts(n, concordant, discordant, tied)


def kendall_tau_distance(r1: CouplingRanking, r2: CouplingRanking,
                         universe: Iterable[str]) -> PairCounts:
    """Pair counts and normalized distance between two rankings over ``universe``."""
    modules = sorted(universe)
    if len(modules) < 2:
        raise DegenerateComparisonError(len(modules))
    pos1, pos2 = r1.positions(), r2.positions()
    missing = [m for m in modules if m not in pos1 or m not in pos2]
    if missing:
        raise ValueError(f"universe modules missing from a ranking: {missing[:5]}")
    return count_pairs([pos1[m] for m in modules], [pos2[m] for m in modules])


def z_score(concordant: int, discordant: int, n: int) -> float:
    if n < 2:
        raise DegenerateComparisonError(n)
    variance = n * (n - 1) * (2 * n + 5) / 18
    return (concordant - discordant) / math.sqrt(variance)


_SMALLEST_NORMAL = sys.float_info.min


def p_value(z: float):
    """One-sided upper-tail probability of the standard normal at ``|z|``.

    Returns a float while it is a normal double; beyond that (``|z|``
    above roughly 37.5) the value is returned as an ``mpmath.mpf`` so it
    stays positive and accurate instead of underflowing.
    """
    x = abs(z) / math.sqrt(2)
    p = 0.5 * math.erfc(x)
    if p >= _SMALLEST_NORMAL:
        return p
    with mpmath.workdps(30):
        return mpmath.mpf(0.5) * mpmath.erfc(mpmath.mpf(x))


def comparison_suite(static_class_graph: WeightedDependencyGraph,
                     dynamic_class_graph: WeightedDependencyGraph,
                     specs: Sequence[ComparisonSpec] = ALL_SPECS) -> list[SuiteCell]:
    """Run every comparison; degenerate cells are reported, not raised."""
    cache = GraphCache(static_class_graph, dynamic_class_graph)
    universes = {
        g: cache.nodes(g, dynamic=False) & cache.nodes(g, dynamic=True) for g in Granularity
    }
    rankings = {}

    def ranked(selector, universe):
        if selector not in rankings:
            v = coupling_vector(selector, static_class_graph, dynamic_class_graph, cache=cache)
            rankings[selector] = ranking(v.restrict(universe))
        return rankings[selector]

    cells = []
    for spec in specs:
        universe = universes[spec.granularity]
        if len(universe) < 2:
            cells.append(SuiteCell(spec, error=str(DegenerateComparisonError(len(universe)))))
            continue
        counts = kendall_tau_distance(ranked(spec.lhs_selector, universe),
                                      ranked(spec.rhs_selector, universe), universe)
        z = z_score(counts.concordant, counts.discordant, counts.n)
        cells.append(SuiteCell(spec, ComparisonResult(
            spec, counts.n, counts.concordant, counts.discordant, counts.tied,
            counts.distance, z, p_value(z))))
    return cells
