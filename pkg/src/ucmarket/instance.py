"""Market instance model: producers, network, demand, and JSON I/O.

An instance is a short horizon of hourly periods over one node or a
two-node network joined by a single line with a symmetric flow bound.
Each producer has a gated output box: offline it produces nothing, online
its output must sit in [g_min, g_max]. Costs are linear with a per-period
commitment charge: a * g + w * u.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Any


class Topology(enum.Enum):
    UNINODE = "uninode"
    TWO_NODE = "two_node"


class InstanceError(ValueError):
    """Base class for everything parse_instance can raise."""


class InstanceSyntaxError(InstanceError):
    """The document is not valid JSON."""


class InstanceSchemaError(InstanceError):
    """The document is JSON but does not have the expected shape."""


class InstanceValidationError(InstanceError):
    """Well-formed document with values that violate model invariants."""

    def __init__(self, violations: tuple["Violation", ...]):
        self.violations = violations
        lines = "; ".join(f"{v.field}: {v.message}" for v in violations)
        super().__init__(f"invalid instance: {lines}")


@dataclass(frozen=True)
class Violation:
    """One failed validation rule. `field` is a dotted path into the document."""

    field: str
    rule: str
    message: str


@dataclass(frozen=True)
class ProducerSpec:
    id: str
    node: int
    g_min: float
    g_max: float
    a: float  # marginal cost, $/MWh
    w: float  # commitment cost per period, $

    def cost(self, u: int, g: float) -> float:
        return self.a * g + self.w * u


@dataclass(frozen=True)
class NetworkSpec:
    topology: Topology
    f_max: float = 0.0


@dataclass(frozen=True)
class MarketInstance:
    periods: int
    demand: tuple[tuple[float, ...], ...]  # one row per node
    producers: tuple[ProducerSpec, ...]
    network: NetworkSpec

    @property
    def node_count(self) -> int:
        return 2 if self.network.topology is Topology.TWO_NODE else 1

    def demand_at(self, node: int, t: int) -> float:
        return self.demand[node - 1][t]

    def producers_at(self, node: int) -> tuple[ProducerSpec, ...]:
        return tuple(p for p in self.producers if p.node == node)

    def producer(self, producer_id: str) -> ProducerSpec:
        for p in self.producers:
            if p.id == producer_id:
                return p
        raise KeyError(producer_id)

    def total_cost(self, u: tuple[tuple[int, ...], ...],
                   g: tuple[tuple[float, ...], ...]) -> float:
        total = 0.0
        for i, p in enumerate(self.producers):
            for t in range(self.periods):
                total += p.cost(u[i][t], g[i][t])
        return total


def validate(instance: MarketInstance) -> list[Violation]:
    """Check model invariants; returns one record per failed rule."""
    out: list[Violation] = []
    if instance.periods < 1:
        out.append(Violation("periods", "positive", "period count must be >= 1"))
    nodes = instance.node_count
    if len(instance.demand) != nodes:
        out.append(Violation("demand", "shape",
                             f"expected {nodes} demand rows, got {len(instance.demand)}"))
    for n, row in enumerate(instance.demand, start=1):
        if instance.periods >= 1 and len(row) != instance.periods:
            out.append(Violation(f"demand.node{n}", "length",
                                 f"expected {instance.periods} entries, got {len(row)}"))
        for t, d in enumerate(row):
            if not math.isfinite(d):
                out.append(Violation(f"demand.node{n}[{t}]", "finite",
                                     "demand must be finite"))
            elif d < 0:
                out.append(Violation(f"demand.node{n}[{t}]", "nonnegative",
                                     f"demand must be >= 0, got {d}"))
    if instance.network.f_max < 0 or not math.isfinite(instance.network.f_max):
        out.append(Violation("network.f_max", "nonnegative",
                             "flow bound must be finite and >= 0"))
    seen: set[str] = set()
    for k, p in enumerate(instance.producers):
        where = f"producers[{k}]"
        if not p.id:
            out.append(Violation(f"{where}.id", "nonempty", "producer id must be nonempty"))
        if p.id in seen:
            out.append(Violation(f"{where}.id", "unique", f"duplicate producer id {p.id!r}"))
        seen.add(p.id)
        if p.node not in range(1, nodes + 1):
            out.append(Violation(f"{where}.node", "topology",
                                 f"node {p.node} not available under "
                                 f"{instance.network.topology.value} topology"))
        for name in ("g_min", "g_max", "a", "w"):
            if not math.isfinite(getattr(p, name)):
                out.append(Violation(f"{where}.{name}", "finite", f"{name} must be finite"))
        if math.isfinite(p.g_min) and p.g_min < 0:
            out.append(Violation(f"{where}.g_min", "nonnegative",
                                 f"g_min must be >= 0, got {p.g_min}"))
        if math.isfinite(p.g_min) and math.isfinite(p.g_max) and p.g_min > p.g_max:
            out.append(Violation(f"{where}.g_max", "ordered",
                                 f"g_min {p.g_min} exceeds g_max {p.g_max}"))
        if math.isfinite(p.w) and p.w < 0:
            out.append(Violation(f"{where}.w", "nonnegative",
                                 f"commitment cost must be >= 0, got {p.w}"))
    return out


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InstanceSchemaError(msg)


def _number(value: Any, where: str) -> float:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceSchemaError(f"{where}: expected a number, got {type(value).__name__}")
    return float(value)


def _number_list(value: Any, length: int, where: str) -> tuple[float, ...]:
    _require(isinstance(value, list), f"{where}: expected an array")
    _require(len(value) == length, f"{where}: expected length {length}, got {len(value)}")
    return tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))


_PRODUCER_KEYS = {"id", "node", "g_min", "g_max", "a", "w"}


def parse_instance(text: str) -> MarketInstance:
    """Parse and validate a JSON instance document.

    Raises InstanceSyntaxError for malformed JSON, InstanceSchemaError for
    missing/unknown/ill-typed fields, and InstanceValidationError (carrying
    the full violation list) when the model invariants fail.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceSyntaxError(f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "top level: expected an object")
    unknown = set(doc) - {"periods", "demand", "network", "producers"}
    _require(not unknown, f"unknown top-level keys: {sorted(unknown)}")
    for key in ("periods", "demand", "producers"):
        _require(key in doc, f"missing required key {key!r}")

    periods = doc["periods"]
    _require(isinstance(periods, int) and not isinstance(periods, bool),
             "periods: expected an integer")

    net_doc = doc.get("network", {"topology": "uninode"})
    _require(isinstance(net_doc, dict), "network: expected an object")
    unknown = set(net_doc) - {"topology", "f_max"}
    _require(not unknown, f"network: unknown keys {sorted(unknown)}")
    topo_raw = net_doc.get("topology", "uninode")
    try:
        topology = Topology(topo_raw)
    except ValueError:
        raise InstanceSchemaError(
            f"network.topology: expected 'uninode' or 'two_node', got {topo_raw!r}") from None
    if topology is Topology.TWO_NODE:
        _require("f_max" in net_doc, "network.f_max: required for two_node topology")
        network = NetworkSpec(topology, _number(net_doc["f_max"], "network.f_max"))
    else:
        _require("f_max" not in net_doc, "network.f_max: only meaningful for two_node topology")
        network = NetworkSpec(topology)

    dem_doc = doc["demand"]
    _require(isinstance(dem_doc, dict), "demand: expected an object")
    allowed = {"node1"} | ({"node2"} if topology is Topology.TWO_NODE else set())
    unknown = set(dem_doc) - allowed
    _require(not unknown, f"demand: unknown keys {sorted(unknown)} for this topology")
    _require("node1" in dem_doc, "demand.node1: required")
    length = periods if periods >= 1 else len(dem_doc["node1"]) if isinstance(dem_doc["node1"], list) else 0
    rows = [_number_list(dem_doc["node1"], length, "demand.node1")]
    if topology is Topology.TWO_NODE:
        if "node2" in dem_doc:
            rows.append(_number_list(dem_doc["node2"], length, "demand.node2"))
        else:
            rows.append(tuple(0.0 for _ in range(length)))

    prod_doc = doc["producers"]
    _require(isinstance(prod_doc, list), "producers: expected an array")
    producers = []
    for k, entry in enumerate(prod_doc):
        where = f"producers[{k}]"
        _require(isinstance(entry, dict), f"{where}: expected an object")
        unknown = set(entry) - _PRODUCER_KEYS
        _require(not unknown, f"{where}: unknown keys {sorted(unknown)}")
        missing = _PRODUCER_KEYS - set(entry)
        _require(not missing, f"{where}: missing keys {sorted(missing)}")
        _require(isinstance(entry["id"], str), f"{where}.id: expected a string")
        _require(isinstance(entry["node"], int) and not isinstance(entry["node"], bool),
                 f"{where}.node: expected an integer")
        producers.append(ProducerSpec(
            id=entry["id"],
            node=entry["node"],
            g_min=_number(entry["g_min"], f"{where}.g_min"),
            g_max=_number(entry["g_max"], f"{where}.g_max"),
            a=_number(entry["a"], f"{where}.a"),
            w=_number(entry["w"], f"{where}.w"),
        ))

    instance = MarketInstance(periods=periods, demand=tuple(rows),
                              producers=tuple(producers), network=network)
    violations = validate(instance)
    if violations:
        raise InstanceValidationError(tuple(violations))
    return instance


def parse_instance_file(path: str) -> MarketInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def instance_to_jsonable(instance: MarketInstance) -> dict:
    doc: dict[str, Any] = {"periods": instance.periods}
    dem: dict[str, Any] = {"node1": list(instance.demand[0])}
    if instance.network.topology is Topology.TWO_NODE:
        dem["node2"] = list(instance.demand[1])
    doc["demand"] = dem
    net: dict[str, Any] = {"topology": instance.network.topology.value}
    if instance.network.topology is Topology.TWO_NODE:
        net["f_max"] = instance.network.f_max
    doc["network"] = net
    doc["producers"] = [
        {"id": p.id, "node": p.node, "g_min": p.g_min, "g_max": p.g_max,
         "a": p.a, "w": p.w}
        for p in instance.producers
    ]
    return doc


def serialize_instance(instance: MarketInstance) -> str:
    """Canonical JSON text; parse_instance(serialize_instance(x)) == x."""
    from .serialize import canonical_json
    return canonical_json(instance_to_jsonable(instance), float_style="repr")
