"""Least-cost commitment and dispatch for desk-scale instances.

Commitment profiles are enumerated exhaustively (instances here have a
handful of producers and periods, so 2^(n*T) stays tiny) and each profile
is dispatched by merit order; two-node profiles additionally minimize over
the line flow, which enters the per-period cost piecewise-linearly, so only
flow breakpoints need to be checked. Everything is deterministic: ties are
broken toward the lexicographically smallest commitment matrix (rows in
producer-id order), merit order with producer-id tie-break, and the
smallest flow value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .instance import MarketInstance, ProducerSpec, Topology
from .tolerances import BAL_TOL

Commitment = tuple[tuple[int, ...], ...]  # [producer][period]
Schedule = tuple[tuple[float, ...], ...]

INF = math.inf


@dataclass(frozen=True)
class DispatchSolution:
    feasible: bool
    u_star: Commitment | None
    g_star: Schedule | None
    flow_star: tuple[float, ...] | None  # per period; None for uninode
    f_star: float | None

    def to_jsonable(self) -> dict:
        return {
            "u": [list(r) for r in self.u_star] if self.u_star is not None else None,
            "g": [list(r) for r in self.g_star] if self.g_star is not None else None,
            "F": list(self.flow_star) if self.flow_star is not None else None,
            "f_star": self.f_star,
            "feasible": self.feasible,
        }


@dataclass(frozen=True)
class FixedDispatch:
    """Cheapest dispatch for one fixed commitment profile."""

    feasible: bool
    g: Schedule | None
    flow: tuple[float, ...] | None
    cost: float | None
    # price_intervals[node-1][t] = (lo, hi), endpoints may be +-inf
    price_intervals: tuple[tuple[tuple[float, float], ...], ...] | None

    def to_jsonable(self) -> dict:
        intervals = None
        if self.price_intervals is not None:
            intervals = [[[_none_if_inf(lo), _none_if_inf(hi)] for lo, hi in node]
                         for node in self.price_intervals]
        return {
            "g": [list(r) for r in self.g] if self.g is not None else None,
            "F": list(self.flow) if self.flow is not None else None,
            "cost": self.cost,
            "price_intervals": intervals,
            "feasible": self.feasible,
        }


def _none_if_inf(x: float):
    return None if math.isinf(x) else x


@dataclass(frozen=True)
class _Fill:
    """Merit-order fill of one node-period: who produces what."""

    g: dict[int, float]  # producer index -> output
    above_min: dict[int, bool]
    below_max: dict[int, bool]
    energy_cost: float


def _merit_fill(units: list[tuple[ProducerSpec, int]], demand: float) -> _Fill | None:
    """Cheapest split of `demand` across committed units; None if out of range.

    Units run at g_min and the remainder is layered onto the cheapest
    available headroom (ties by producer id). Saturation is tracked exactly
    so price intervals never depend on float residue.
    """
    base = sum(p.g_min for p, _ in units)
    cap = sum(p.g_max for p, _ in units)
    if demand < base - BAL_TOL or demand > cap + BAL_TOL:
        return None
    residual = min(max(demand - base, 0.0), cap - base)
    g: dict[int, float] = {}
    above: dict[int, bool] = {}
    below: dict[int, bool] = {}
    energy = 0.0
    for p, idx in sorted(units, key=lambda it: (it[0].a, it[0].id)):
        span = p.g_max - p.g_min
        extra = min(residual, span)
        residual -= extra
        if extra >= span:
            out = p.g_max
            above[idx] = span > 0
            below[idx] = False
        else:
            out = p.g_min + extra
            above[idx] = extra > 0
            below[idx] = span > 0
        g[idx] = out
        energy += p.a * out
    return _Fill(g=g, above_min=above, below_max=below, energy_cost=energy)


def _fill_interval(units: list[tuple[ProducerSpec, int]], fill: _Fill) -> tuple[float, float]:
    lo = -INF
    hi = INF
    for p, idx in units:
        if fill.above_min[idx]:
            lo = max(lo, p.a)
        if fill.below_max[idx]:
            hi = min(hi, p.a)
    return lo, hi


def _node_interval(units: list[tuple[ProducerSpec, int]], fill: _Fill | None,
                   node_producers: tuple[ProducerSpec, ...],
                   period_active: bool) -> tuple[float, float]:
    """Supporting price interval for one node and period.

    With committed units this is the merit/KKT subgradient interval. A node
    that is idle while the period has commitment elsewhere is pinned at its
    cheapest would-be entrant; a fully idle period (or a node with no
    producers) is pinned at zero.
    """
    if units and fill is not None:
        return _fill_interval(units, fill)
    if node_producers and period_active:
        entrant = min(p.a for p in node_producers)
        return entrant, entrant
    return 0.0, 0.0


def _id_ordered_indices(instance: MarketInstance) -> list[int]:
    return sorted(range(len(instance.producers)), key=lambda i: instance.producers[i].id)


def commitment_profiles(instance: MarketInstance):
    """All commitment matrices, lexicographically by (producer id, period)."""
    n = len(instance.producers)
    order = _id_ordered_indices(instance)
    for bits in itertools.product((0, 1), repeat=n * instance.periods):
        u = [(0,) * instance.periods] * n
        for rank, idx in enumerate(order):
            u[idx] = tuple(bits[rank * instance.periods:(rank + 1) * instance.periods])
        yield tuple(u)


def _dispatch_period_uninode(instance: MarketInstance, u_t: list[int], t: int):
    units = [(p, i) for i, p in enumerate(instance.producers) if u_t[i]]
    fill = _merit_fill(units, instance.demand_at(1, t))
    if fill is None:
        return None
    interval = _node_interval(units, fill, instance.producers,
                              period_active=bool(units))
    g_t = [fill.g.get(i, 0.0) for i in range(len(instance.producers))]
    return g_t, None, fill.energy_cost, (interval,)


def _flow_candidates(d1: float, d2: float, f_max: float,
                     units1, units2) -> list[float] | None:
    m1 = sum(p.g_min for p, _ in units1)
    cap1 = sum(p.g_max for p, _ in units1)
    m2 = sum(p.g_min for p, _ in units2)
    cap2 = sum(p.g_max for p, _ in units2)
    lo = max(-f_max, m1 - d1, d2 - cap2)
    hi = min(f_max, cap1 - d1, d2 - m2)
    if lo > hi + BAL_TOL:
        return None
    hi = max(lo, hi)
    cands = {lo, hi}
    # flows at which either node's merit stack changes its marginal unit
    level = m1
    for p, _ in sorted(units1, key=lambda it: (it[0].a, it[0].id)):
        level += p.g_max - p.g_min
        cands.add(level - d1)
    level = m2
    for p, _ in sorted(units2, key=lambda it: (it[0].a, it[0].id)):
        level += p.g_max - p.g_min
        cands.add(d2 - level)
    return sorted(f for f in cands if lo - BAL_TOL <= f <= hi + BAL_TOL)


def _dispatch_period_two_node(instance: MarketInstance, u_t: list[int], t: int):
    units1 = [(p, i) for i, p in enumerate(instance.producers) if u_t[i] and p.node == 1]
    units2 = [(p, i) for i, p in enumerate(instance.producers) if u_t[i] and p.node == 2]
    d1 = instance.demand_at(1, t)
    d2 = instance.demand_at(2, t)
    cands = _flow_candidates(d1, d2, instance.network.f_max, units1, units2)
    if cands is None:
        return None
    best = None
    for f in cands:
        f = min(max(f, -instance.network.f_max), instance.network.f_max)
        fill1 = _merit_fill(units1, d1 + f)
        fill2 = _merit_fill(units2, d2 - f)
        if fill1 is None or fill2 is None:
            continue
        cost = fill1.energy_cost + fill2.energy_cost
        # ascending scan + strict <: cost ties keep the smallest flow
        if best is None or cost < best[0]:
            best = (cost, f, fill1, fill2)
    if best is None:
        return None
    cost, f, fill1, fill2 = best
    active = bool(units1 or units2)
    iv1 = _node_interval(units1, fill1, instance.producers_at(1), active)
    iv2 = _node_interval(units2, fill2, instance.producers_at(2), active)
    g_t = [fill1.g.get(i, fill2.g.get(i, 0.0)) for i in range(len(instance.producers))]
    return g_t, f, cost, (iv1, iv2)


def dispatch_fixed_commitment(instance: MarketInstance, u: Commitment) -> FixedDispatch:
    """Cheapest dispatch with the commitment matrix frozen.

    Periods decouple once u is fixed, so each is solved independently.
    Returns feasible=False with no schedule when some period cannot be
    balanced under the committed capacity and flow bound.
    """
    n = len(instance.producers)
    if len(u) != n or any(len(row) != instance.periods for row in u):
        raise ValueError("commitment matrix shape does not match the instance")
    two_node = instance.network.topology is Topology.TWO_NODE
    g_rows = [[0.0] * instance.periods for _ in range(n)]
    flows: list[float] = []
    intervals: list[list[tuple[float, float]]] = [[] for _ in range(instance.node_count)]
    commit_cost = sum(p.w * sum(u[i]) for i, p in enumerate(instance.producers))
    total = commit_cost
    for t in range(instance.periods):
        u_t = [u[i][t] for i in range(n)]
        res = (_dispatch_period_two_node(instance, u_t, t) if two_node
               else _dispatch_period_uninode(instance, u_t, t))
        if res is None:
            return FixedDispatch(False, None, None, None, None)
        g_t, f_t, energy, ivs = res
        for i in range(n):
            g_rows[i][t] = g_t[i]
        if two_node:
            flows.append(f_t)
        for node_idx, iv in enumerate(ivs):
            intervals[node_idx].append(iv)
        total += energy
    return FixedDispatch(
        feasible=True,
        g=tuple(tuple(row) for row in g_rows),
        flow=tuple(flows) if two_node else None,
        cost=total,
        price_intervals=tuple(tuple(node) for node in intervals),
    )


def solve_dispatch(instance: MarketInstance) -> DispatchSolution:
    """Global least-cost commitment and dispatch.

    Exhaustive over commitment profiles; deterministic tie-breaks as per the
    module docstring. feasible=False when no profile can serve the demand.
    """
    best: tuple[float, Commitment, FixedDispatch] | None = None
    for u in commitment_profiles(instance):
        fixed = dispatch_fixed_commitment(instance, u)
        if not fixed.feasible:
            continue
        if best is None or fixed.cost < best[0]:
            best = (fixed.cost, u, fixed)
    if best is None:
        return DispatchSolution(False, None, None, None, None)
    cost, u, fixed = best
    return DispatchSolution(True, u, fixed.g, fixed.flow, cost)


def _unit_grid(p: ProducerSpec, step: float) -> list[float]:
    pts = []
    k = 0
    while True:
        v = p.g_min + k * step
        if v >= p.g_max - BAL_TOL:
            break
        pts.append(v)
        k += 1
    pts.append(p.g_max)
    return pts


def _grid_assignments(units: list[tuple[ProducerSpec, int]], demand: float, step: float):
    """Yield exact-balance grid assignments (dict idx -> g).

    All units but the last run on their grids; the last one takes whatever
    closes the balance, provided that value sits inside its box (so a
    single-unit node can serve off-grid demand exactly).
    """
    if not units:
        if abs(demand) <= BAL_TOL:
            yield {}
        return
    if len(units) == 1:
        p, idx = units[0]
        if p.g_min - BAL_TOL <= demand <= p.g_max + BAL_TOL:
            yield {idx: min(max(demand, p.g_min), p.g_max)}
        return
    p, idx = units[0]
    rest = units[1:]
    for v in _unit_grid(p, step):
        for sub in _grid_assignments(rest, demand - v, step):
            sub = dict(sub)
            sub[idx] = v
            yield sub


def _symmetric_grid(bound: float, step: float) -> list[float]:
    if bound <= 0:
        return [0.0]
    pts = [-bound]
    k = 0
    while True:
        v = -bound + (k + 1) * step
        if v >= bound - BAL_TOL:
            break
        pts.append(v)
        k += 1
    pts.append(bound)
    pts.append(0.0)
    return sorted(set(pts))


def oracle_dispatch(instance: MarketInstance, grid_step: float = 1.0) -> DispatchSolution:
    """Brute-force reference: enumerate commitments and grid dispatches.

    Slow by design; intended for small instances (a few producers, one or
    two periods) as an independent check on solve_dispatch. The last unit in
    each assignment absorbs the balance residual so only grid points that
    close the balance exactly are kept.
    """
    two_node = instance.network.topology is Topology.TWO_NODE
    n = len(instance.producers)
    best: tuple[float, Commitment, list[list[float]], list[float]] | None = None
    for u in commitment_profiles(instance):
        total = sum(p.w * sum(u[i]) for i, p in enumerate(instance.producers))
        g_rows = [[0.0] * instance.periods for _ in range(n)]
        flows = []
        ok = True
        for t in range(instance.periods):
            committed = [(p, i) for i, p in enumerate(instance.producers) if u[i][t]]
            best_t = None
            if two_node:
                units1 = [(p, i) for p, i in committed if p.node == 1]
                units2 = [(p, i) for p, i in committed if p.node == 2]
                for f in _symmetric_grid(instance.network.f_max, grid_step):
                    for a1 in _grid_assignments(units1, instance.demand_at(1, t) + f, grid_step):
                        for a2 in _grid_assignments(units2, instance.demand_at(2, t) - f, grid_step):
                            assign = {**a1, **a2}
                            cost = sum(p.a * assign[i] for p, i in committed)
                            if best_t is None or cost < best_t[0]:
                                best_t = (cost, assign, f)
            else:
                for assign in _grid_assignments(committed, instance.demand_at(1, t), grid_step):
                    cost = sum(p.a * assign[i] for p, i in committed)
                    if best_t is None or cost < best_t[0]:
                        best_t = (cost, assign, None)
            if best_t is None:
                ok = False
                break
            cost_t, assign, f_t = best_t
            total += cost_t
            for i, v in assign.items():
                g_rows[i][t] = v
            if two_node:
                flows.append(f_t)
        if ok and (best is None or total < best[0]):
            best = (total, u, g_rows, flows)
    if best is None:
        return DispatchSolution(False, None, None, None, None)
    total, u, g_rows, flows = best
    return DispatchSolution(True, u, tuple(tuple(r) for r in g_rows),
                            tuple(flows) if two_node else None, total)


def balance_residuals(instance: MarketInstance, g: Schedule,
                      flow: tuple[float, ...] | None) -> list[float]:
    """Per-period (and per-node) balance residuals; all should be ~0."""
    out = []
    for t in range(instance.periods):
        if instance.network.topology is Topology.TWO_NODE:
            f = flow[t] if flow is not None else 0.0
            s1 = sum(g[i][t] for i, p in enumerate(instance.producers) if p.node == 1)
            s2 = sum(g[i][t] for i, p in enumerate(instance.producers) if p.node == 2)
            out.append(s1 - instance.demand_at(1, t) - f)
            out.append(s2 + f - instance.demand_at(2, t))
        else:
            s = sum(g[i][t] for i in range(len(instance.producers)))
            out.append(s - instance.demand_at(1, t))
    return out
