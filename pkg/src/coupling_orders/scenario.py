"""Plain-text simulator scenarios (``key = value`` lines, ``#`` comments).

Recognized keys::

    static          call-facts CSV with the static class graph
    random_nodes    generate a random static graph instead (with
    random_density, random_packages, random_seed)
    builtin         "skew": the inverted-order scenario; implies explicit weights
    modules         module count for the builtin scenario (default 20)
    model           uniform | zipf | explicit
    zipf_s          zipf exponent (> 0)
    explicit        call-facts CSV whose counts are the explicit weights
    emission        sampled | proportional   (explicit model only)
    total_calls     number of records to emit
    seed            64-bit seed
    coverage        all-edges-at-least-once | free
    trace           output trace file name (``.gz`` suffix compresses)

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ScenarioError
from .model import WeightedDependencyGraph, read_call_facts
from .simulator import (
    Coverage, FrequencyModel, ModelKind, random_static_graph, skew_scenario,
)

_KEYS = {"static", "random_nodes", "random_density", "random_packages", "random_seed",
         "builtin", "modules", "model", "zipf_s", "explicit", "emission", "total_calls", "seed",
         "coverage", "trace"}


@dataclass(frozen=True)
class Scenario:
    static_graph: WeightedDependencyGraph
    model: FrequencyModel
    trace_name: str = "trace.log"
    generated_static: bool = False


def parse_config(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        if key not in _KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def _int(values, key, default=None):
    if key not in values:
        if default is None:
            raise ScenarioError(f"missing required key {key!r}")
        return default
    try:
        return int(values[key].replace("_", ""))
    except ValueError:
        raise ScenarioError(f"{key} must be an integer, got {values[key]!r}") from None


def _float(values, key, default):
    try:
        return float(values.get(key, default))
    except ValueError:
        raise ScenarioError(f"{key} must be a number, got {values[key]!r}") from None


def _read_graph(path: Path) -> WeightedDependencyGraph:
    with open(path, encoding="utf-8") as fh:
        return read_call_facts(fh, source=str(path))


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    path = Path(path)
    values = parse_config(path.read_text(encoding="utf-8"))
    base = path.parent

    explicit = {}
    kind_name = values.get("model")
    generated = True
    if values.get("builtin"):
        if values["builtin"] != "skew":
            raise ScenarioError(f"unknown builtin scenario {values['builtin']!r}")
        static, explicit = skew_scenario(_int(values, "modules", 20))
        kind_name = kind_name or "explicit"
    elif "static" in values:
        static = _read_graph(base / values["static"])
        generated = False
    elif "random_nodes" in values:
        static = random_static_graph(
            _int(values, "random_nodes"), _float(values, "random_density", 0.1),
            _int(values, "random_seed", 0), _int(values, "random_packages", 5))
    else:
        raise ScenarioError("scenario needs one of 'static', 'random_nodes' or 'builtin'")

    try:
        kind = ModelKind(kind_name or "uniform")
        coverage = Coverage(values.get("coverage", "free"))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    if "explicit" in values:
        explicit = dict(_read_graph(base / values["explicit"]).edges)
    emission = values.get("emission", "sampled")
    if emission not in ("sampled", "proportional"):
        raise ScenarioError(f"emission must be 'sampled' or 'proportional', got {emission!r}")
    if kind is ModelKind.EXPLICIT and not values.get("total_calls"):
        total = sum(explicit.values())
    else:
        total = _int(values, "total_calls")
    model = FrequencyModel(
        kind=kind,
        total_calls=total,
        seed=_int(values, "seed", 0) if seed is None else seed,
        coverage=coverage,
        zipf_s=_float(values, "zipf_s", 1.0),
        explicit=explicit if kind is ModelKind.EXPLICIT else {},
        proportional=emission == "proportional",
    )
    return Scenario(static, model, values.get("trace", "trace.log"), generated)
