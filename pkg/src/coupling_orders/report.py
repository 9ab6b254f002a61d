"""Rendering of comparison suites as CSV and Markdown.

Both renderings read the same list of :class:`SuiteCell` values, so they
cannot disagree. Output is deterministic: no timestamps, fixed ordering.
"""

from __future__ import annotations

import csv
import io
from typing import IO, Sequence

import mpmath

from .compare import PAIRINGS, SuiteCell
from .model import Direction, Granularity

RESULTS_HEADER = ("granularity", "lhs", "rhs", "direction", "n", "concordant", "discordant",
                  "tied", "tau_distance", "z", "p")

DEGENERATE = "n/a (n<2)"


def format_p(p) -> str:
    if isinstance(p, float):
        return f"{p:.3e}"
    # beyond double range: same layout as the float branch
    e = int(mpmath.floor(mpmath.log10(p)))
    mantissa = float(p / mpmath.power(10, e))
    if mantissa >= 9.9995:
        mantissa, e = mantissa / 10, e + 1
    return f"{mantissa:.3f}e{e:+03d}"


def write_results_csv(cells: Sequence[SuiteCell], fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for cell in cells:
        s = cell.spec
        head = [s.granularity.label, s.lhs.value, s.rhs.value, s.direction.label]
        r = cell.result
        if r is None:
            writer.writerow(head + ["", "", "", "", DEGENERATE, "", ""])
            continue
        writer.writerow(head + [r.n, r.concordant, r.discordant, r.tied_pairs,
                                f"{r.tau_distance:.6f}", f"{r.z_score:.6f}", format_p(r.p_value)])


def results_csv(cells: Sequence[SuiteCell]) -> str:
    buf = io.StringIO()
    write_results_csv(cells, buf)
    return buf.getvalue()


def _grid(cells: Sequence[SuiteCell]) -> dict[tuple, SuiteCell]:
    return {(c.spec.granularity, c.spec.lhs, c.spec.rhs, c.spec.direction): c for c in cells}


def distance_table(cells: Sequence[SuiteCell]) -> list[list[str]]:
    """6 rows x 3 columns of distances, with a row label column and mean row."""
    grid = _grid(cells)
    rows = []
    sums = {d: [] for d in Direction}
    for g in Granularity:
        for lhs, rhs in PAIRINGS:
            row = [f"⟨{g.value}: {lhs.value} vs {rhs.value}⟩"]
            for d in Direction:
                cell = grid.get((g, lhs, rhs, d))
                if cell is None or cell.result is None:
                    row.append(DEGENERATE)
                else:
                    row.append(f"{cell.result.tau_distance:.3f}")
                    sums[d].append(cell.result.tau_distance)
            rows.append(row)
    mean = ["mean over pairings"]
    for d in Direction:
        vals = sums[d]
        mean.append(f"{sum(vals) / len(vals):.3f}" if vals else DEGENERATE)
    rows.append(mean)
    return rows


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    line = lambda cells: "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    rule = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(header), rule, *map(line, rows)])


def render_markdown(cells: Sequence[SuiteCell], title: str | None = None) -> str:
    out = []
    if title:
        out += [f"## {title}", ""]
    out.append("Kendall-Tau distance between coupling orders")
    out.append("")
    out.append(_md_table(["comparison", "import", "export", "combined"], distance_table(cells)))
    out.append("")
    out.append("Pair counts and significance (z uncorrected for ties, one-sided p)")
    out.append("")
    detail = []
    for cell in cells:
        s = cell.spec
        label = f"⟨{s.granularity.value}: {s.lhs.value} vs {s.rhs.value}⟩ {s.direction.label}"
        r = cell.result
        if r is None:
            detail.append([label, DEGENERATE, "", "", "", "", ""])
        else:
            detail.append([label, str(r.n), str(r.concordant), str(r.discordant),
                           str(r.tied_pairs), f"{r.z_score:.2f}", format_p(r.p_value)])
    out.append(_md_table(["cell", "n", "concordant", "discordant", "tied", "z", "p"], detail))
    return "\n".join(out) + "\n"


def render_text_table(cells: Sequence[SuiteCell]) -> str:
    """The distance grid alone, for terminals."""
    return _md_table(["comparison", "import", "export", "combined"], distance_table(cells)) + "\n"

