"""Acceptance gate: one test per headline criterion, each printing PASS/FAIL.

Every check compares the package against an independent oracle (pair
enumeration, per-node edge scans, the javatools disassembler, simulator
ground truth) or a published constant.
"""

import contextlib
import csv
import gzip
import io
import json
import random
import subprocess
import sys
import time

import pytest

from bytecode_corpus import build_corpus
from conftest import ACCEPTANCE_LINES
from oracles import degrees_bruteforce, disassembler_call_sites, pair_counts_bruteforce

from coupling_orders.bytecode import extract_static_graph, parse_class_file
from coupling_orders.cli import main as cli_main
from coupling_orders.compare import ALL_SPECS, comparison_suite, count_pairs, p_value
from coupling_orders.metrics import GraphCache, coupling_vector
from coupling_orders.model import (
    ALL_SELECTORS, Approach, CouplingSelector, Direction, Granularity,
    WeightedDependencyGraph as G, write_call_facts,
)
from coupling_orders.simulator import (
    Coverage, FrequencyModel, ModelKind, random_static_graph, simulate_trace, skew_scenario,
    write_trace_file,
)
from coupling_orders.traces import accumulate_trace

C = Granularity.CLASS


@contextlib.contextmanager
def criterion(name):
    """Record one PASS/FAIL line for ``name``; ``detail`` may be filled in by the body."""
    detail = {}
    try:
        yield detail
    except BaseException:
        line = f"FAIL  {name}  {detail.get('text', '')}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"PASS  {name}  {detail.get('text', '')}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)


def _random_ranking_pair(rng):
    n = rng.randint(2, 100)
    levels = rng.randint(1, n)  # few levels -> heavy ties
    return ([rng.randint(0, levels) for _ in range(n)],
            [rng.randint(0, levels) for _ in range(n)])


def test_kendall_tau_oracle_equivalence():
    with criterion("kendall-tau oracle equivalence (1000 pairs, n in [2,100], ties)") as d:
        rng = random.Random(20170213)
        cases = [_random_ranking_pair(rng) for _ in range(1000)]
        start = time.perf_counter()
        fast = [count_pairs(x, y) for x, y in cases]
        elapsed = time.perf_counter() - start
        mismatches = 0
        for (x, y), got in zip(cases, fast):
            c, dis, t = pair_counts_bruteforce(x, y)
            pairs = len(x) * (len(x) - 1) // 2
            if (got.concordant, got.discordant, got.tied, got.distance) != (c, dis, t, dis / pairs):
                mismatches += 1
        assert any(len(set(x)) < len(x) for x, _ in cases)
        d["text"] = f"mismatches={mismatches} fast_path={elapsed:.2f}s"
        assert mismatches == 0
        assert elapsed < 10


def test_significance_anchor():
    with criterion("significance anchor p(10)=7.6e-24 +-2%, p(0)=0.5") as d:
        p10 = p_value(10)
        d["text"] = f"p(10)={p10:.4e} p(0)={p_value(0)}"
        assert abs(p10 / 7.6e-24 - 1) <= 0.02
        assert p_value(0) == 0.5


def test_coverage_scenario():
    with criterion("coverage scenario: six (., s vs u, .) distances = 0") as d:
        static = random_static_graph(50, 0.1, seed=50)
        model = FrequencyModel(ModelKind.UNIFORM, 10 * len(static.edges), seed=50,
                               coverage=Coverage.ALL_EDGES)
        trace = simulate_trace(static, model)
        dynamic = accumulate_trace(iter(trace)).graph
        assert dynamic == trace.ground_truth
        assert set(dynamic.edges) == set(static.edges)
        cells = comparison_suite(static, dynamic)
        su = [c for c in cells if (c.spec.lhs, c.spec.rhs) == (Approach.STATIC, Approach.UNWEIGHTED)]
        distances = [c.result.tau_distance for c in su]
        d["text"] = f"edges={len(static.edges)} distances={distances}"
        assert len(su) == 6
        assert distances == [0.0] * 6


def _oracle_distance(static, dynamic, spec):
    """Distance for one class-level cell from brute-force degrees and pair enumeration."""
    universe = sorted(static.nodes & dynamic.nodes)

    def degrees(approach):
        g = static if approach is Approach.STATIC else dynamic
        edges = dict(g.edges) if approach is Approach.WEIGHTED else {e: 1 for e in g.edges}
        return degrees_bruteforce(g.nodes, edges, spec.direction.value)

    lhs, rhs = degrees(spec.lhs), degrees(spec.rhs)
    c, dis, t = pair_counts_bruteforce([lhs[m] for m in universe], [rhs[m] for m in universe])
    n = len(universe)
    return dis / (n * (n - 1) // 2)


def test_skew_scenario():
    with criterion("skew scenario: (c,u vs w,c) >= 0.9 and (c,s vs u,c) = 0") as d:
        static, weights = skew_scenario(20)
        model = FrequencyModel(ModelKind.EXPLICIT, sum(weights.values()), seed=7,
                               explicit=weights, proportional=True)
        trace = simulate_trace(static, model)
        dynamic = accumulate_trace(iter(trace)).graph
        assert dict(dynamic.edges) == weights
        cells = {(c.spec.granularity, c.spec.lhs, c.spec.rhs, c.spec.direction): c.result
                 for c in comparison_suite(static, dynamic)}
        uw = cells[(C, Approach.UNWEIGHTED, Approach.WEIGHTED, Direction.COMBINED)]
        su = cells[(C, Approach.STATIC, Approach.UNWEIGHTED, Direction.COMBINED)]
        oracle_uw = _oracle_distance(static, dynamic, uw.spec)
        oracle_su = _oracle_distance(static, dynamic, su.spec)
        d["text"] = (f"u_vs_w={uw.tau_distance:.4f} (oracle {oracle_uw:.4f}) "
                     f"s_vs_u={su.tau_distance:.4f} (oracle {oracle_su:.4f})")
        assert uw.n == 20
        assert uw.tau_distance == oracle_uw >= 0.9
        assert su.tau_distance == oracle_su == 0.0


def test_bytecode_fixtures():
    with criterion("bytecode fixtures match hand counts and disassembler") as d:
        corpus = build_corpus()
        tags = set().union(*(f.tags for f in corpus))
        bad = []
        for f in corpus:
            facts = parse_class_file(f.data)
            calls, s, a, i, total = disassembler_call_sites(f.data)
            if not (dict(facts.calls) == f.expected == calls
                    and (facts.skipped_self, facts.skipped_array, facts.skipped_indy)
                    == (f.skipped_self, f.skipped_array, f.skipped_indy) == (s, a, i)
                    and f.invokes == total):
                bad.append(f.name)
        graph = extract_static_graph([f.data for f in corpus])
        d["text"] = f"fixtures={len(corpus)} mismatched={bad} call_sites={graph.total_weight}"
        assert len(corpus) >= 10
        assert {"plain", "interface", "self", "inner", "indy"} <= tags
        assert not bad
        assert graph.total_weight == sum(sum(f.expected.values()) for f in corpus)


def test_conservation_suite():
    with criterion("conservation suite over 100 random graphs, 18 selectors") as d:
        violations = 0
        for seed in range(100):
            rng = random.Random(seed)
            static = random_static_graph(rng.randint(2, 60), rng.uniform(0.01, 0.4), seed=seed,
                                         packages=rng.randint(1, 8))
            dynamic = G(C, {e: rng.randint(1, 100) for e in static.edges if rng.random() < 0.7},
                        [m for m in static.nodes if rng.random() < 0.9])
            cache = GraphCache(static, dynamic)
            vec = {s: coupling_vector(s, static, dynamic, cache=cache).degrees for s in ALL_SELECTORS}
            for s in ALL_SELECTORS:
                g = cache.graph(s.granularity, s.approach)
                imp = vec[CouplingSelector(s.granularity, s.approach, Direction.IMPORT)]
                exp = vec[CouplingSelector(s.granularity, s.approach, Direction.EXPORT)]
                comb = vec[CouplingSelector(s.granularity, s.approach, Direction.COMBINED)]
                ok = sum(imp.values()) == sum(exp.values()) == g.total_weight
                ok &= all(comb[m] == imp[m] + exp[m] for m in comb)
                if s.approach is Approach.UNWEIGHTED:
                    w = vec[CouplingSelector(s.granularity, Approach.WEIGHTED, s.direction)]
                    ok &= all(vec[s][m] <= w[m] for m in vec[s])
                violations += not ok
        d["text"] = f"graphs=100 violations={violations}"
        assert violations == 0


_MEASURE = """
import json, resource, sys, time
from coupling_orders.cli import main
start = time.perf_counter()
code = main(sys.argv[1:])
print(json.dumps({"code": code, "seconds": time.perf_counter() - start,
                  "maxrss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss}))
"""


def _measured_cli(*argv):
    proc = subprocess.run([sys.executable, "-c", _MEASURE, *map(str, argv)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_scale_smoke(tmp_path):
    with criterion("scale: 1e7-record gzip ingest < 60 s, bounded memory, 4 shards == single") as d:
        static = random_static_graph(400, 0.03, seed=1)
        total = 10 ** 7
        trace = simulate_trace(static, FrequencyModel(ModelKind.ZIPF, total, seed=1, zipf_s=0.8))
        whole = tmp_path / "trace.log.gz"
        write_trace_file(trace, str(whole))
        small = tmp_path / "small.log.gz"
        write_trace_file(simulate_trace(static, FrequencyModel(ModelKind.ZIPF, total // 10,
                                                               seed=1, zipf_s=0.8)), str(small))
        # shards cut at record boundaries from the same trace text
        shard_paths = [tmp_path / f"shard{i}.log.gz" for i in range(4)]
        with gzip.open(whole, "rt") as src:
            for i, path in enumerate(shard_paths):
                with gzip.open(path, "wt", compresslevel=1) as dst:
                    for _ in range(total // 4):
                        dst.write(src.readline())
            assert src.readline() == ""

        big = _measured_cli("ingest", whole, "--out", tmp_path / "single")
        tiny = _measured_cli("ingest", small, "--out", tmp_path / "tiny")
        sharded = _measured_cli("ingest", *shard_paths, "--jobs", "4", "--out", tmp_path / "sharded")
        single_csv = (tmp_path / "single" / "dynamic.csv").read_bytes()
        sharded_csv = (tmp_path / "sharded" / "dynamic.csv").read_bytes()
        truth = io.StringIO()
        write_call_facts(trace.ground_truth, truth)
        growth = big["maxrss_kb"] / tiny["maxrss_kb"]
        d["text"] = (f"ingest={big['seconds']:.1f}s maxrss={big['maxrss_kb'] // 1024}MB "
                     f"(1e6 records: {tiny['maxrss_kb'] // 1024}MB, x{growth:.2f}) "
                     f"edges={len(trace.ground_truth.edges)} sharded_equal={single_csv == sharded_csv}")
        assert big["code"] == sharded["code"] == 0
        assert big["seconds"] < 60
        # 10x the records must not mean 10x the memory
        assert growth < 1.5
        assert single_csv == sharded_csv == truth.getvalue().encode()


def test_report_shape(tmp_path, capsys):
    with criterion("report shape: 18 cells in 6 rows x 3 columns") as d:
        static = random_static_graph(30, 0.2, seed=9)
        dynamic = simulate_trace(static, FrequencyModel(ModelKind.ZIPF, 5000, seed=9)).ground_truth
        shapes = []
        for name, (s, dyn) in {"normal": (static, dynamic),
                               "degenerate": (G(C, {("a.A", "a.B"): 1}),
                                              G(C, {("a.A", "a.B"): 2}))}.items():
            out = tmp_path / name
            out.mkdir()
            for fname, g in (("static.csv", s), ("dynamic.csv", dyn)):
                with open(out / fname, "w", newline="") as fh:
                    write_call_facts(g, fh)
            code = cli_main(["compare", str(out / "static.csv"), str(out / "dynamic.csv"),
                             "--out", str(out / "r")])
            md = capsys.readouterr().out
            with open(out / "r" / "results.csv", newline="") as fh:
                rows = list(csv.reader(fh))[1:]
            table = md.split("\n\n")[1].splitlines()
            body = [line for line in table if line.startswith("| ⟨")]
            labels = [line.split("|")[1].strip() for line in body]
            header = [c.strip() for c in table[0].split("|")[1:-1]]
            shapes.append((name, code, len(rows), len(body), {line.count("|") - 2 for line in body}))
            assert code == 0
            assert len(rows) == 18
            assert [tuple(r[:4]) for r in rows] == [
                (s.granularity.label, s.lhs.value, s.rhs.value, s.direction.label) for s in ALL_SPECS]
            assert header[1:] == ["import", "export", "combined"]
            assert labels == [f"⟨{g}: {a} vs {b}⟩" for g in "cp"
                              for a, b in (("s", "u"), ("s", "w"), ("u", "w"))]
            assert all(line.count("|") == 5 for line in body)
        d["text"] = f"{shapes}"
