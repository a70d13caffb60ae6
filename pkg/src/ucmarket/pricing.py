"""Price formation: dual evaluation, convex hull prices, marginal prices.

The relaxed welfare dual at prices q is demand revenue minus every entry's
best-response profit; its maximizers are the convex hull prices. The dual
is piecewise linear and concave in q with kinks only at each producer's
average-cost candidates (a, a + w/g_max, a + w/g_min), so maximizing over
that finite candidate set is exact. Two-node instances add the flow term,
whose kinks lie on the diagonal q1 = q2; cross pairs plus the diagonal at
every candidate cover all vertices of the arrangement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dispatch import DispatchSolution, dispatch_fixed_commitment
from .instance import MarketInstance, ProducerSpec, Topology
from .profit import (BestResponse, ConsistencyError, best_response,
                     ftr_best_response, standard_profit)
from .tolerances import MONEY_TOL

# candidate dual values closer than this are treated as tied; the
# lexicographically smallest price vector among ties wins
_TIE_TOL = 1e-9


class PriceMethod(enum.Enum):
    MARGINAL = "marginal"
    CHP = "chp"
    GRID = "grid"
    USER = "user"


@dataclass(frozen=True)
class PriceSystem:
    method: PriceMethod
    prices: tuple[tuple[float, ...], ...]  # one row per node
    tie_break: str | None = None

    def to_jsonable(self) -> dict:
        out: dict = {"method": self.method.value,
                     "prices": {f"node{n + 1}": list(row)
                                for n, row in enumerate(self.prices)}}
        if self.tie_break is not None:
            out["tie_break"] = self.tie_break
        return out


def user_price(instance: MarketInstance, rows) -> PriceSystem:
    rows = tuple(tuple(float(v) for v in row) for row in rows)
    if len(rows) != instance.node_count or any(len(r) != instance.periods for r in rows):
        raise ValueError("price rows must match the instance's nodes and periods")
    return PriceSystem(PriceMethod.USER, rows)


@dataclass(frozen=True)
class DualEvaluation:
    value: float
    producer_responses: dict[str, BestResponse]
    ftr_response: BestResponse | None


class InfeasibleInstanceError(RuntimeError):
    """Raised by operations that need a feasible instance."""


def dual_value(instance: MarketInstance, price: PriceSystem, nu: float = 0.0,
               family=None) -> DualEvaluation:
    """Relaxed dual: demand revenue minus best-response profits.

    With a family attached, each entry's response includes its scaled
    bonus; with family absent this is the standard relaxed dual.
    """
    value = 0.0
    for n in range(instance.node_count):
        value += float(np.dot(price.prices[n], instance.demand[n]))
    responses: dict[str, BestResponse] = {}
    for p in instance.producers:
        comp = family.component(p.id) if family is not None else None
        br = best_response(p, price.prices[p.node - 1], nu=nu, component=comp)
        responses[p.id] = br
        value -= br.profit
    ftr = None
    if instance.network.topology is Topology.TWO_NODE:
        comp = family.ftr if family is not None else None
        ftr = ftr_best_response(price.prices[0], price.prices[1],
                                instance.network.f_max, nu=nu, component=comp)
        value -= ftr.profit
    return DualEvaluation(value=value, producer_responses=responses, ftr_response=ftr)


def _period_response(p: ProducerSpec, q: float) -> float:
    return max(0.0,
               (q - p.a) * p.g_min - p.w,
               (q - p.a) * p.g_max - p.w)


def _price_candidates(producers) -> list[float]:
    cands = set()
    for p in producers:
        cands.add(p.a)
        if p.g_max > 0:
            cands.add(p.a + p.w / p.g_max)
        if p.g_min > 0:
            cands.add(p.a + p.w / p.g_min)
    return sorted(cands)


def _chp_period_uninode(instance: MarketInstance, t: int) -> float:
    cands = _price_candidates(instance.producers)
    if not cands:
        return 0.0
    d = instance.demand_at(1, t)
    best_q = cands[0]
    best_v = -math.inf
    for q in cands:
        v = q * d - sum(_period_response(p, q) for p in instance.producers)
        if v > best_v + _TIE_TOL:
            best_v, best_q = v, q
    return best_q


def _chp_period_two_node(instance: MarketInstance, t: int) -> tuple[float, float]:
    c1 = _price_candidates(instance.producers_at(1))
    c2 = _price_candidates(instance.producers_at(2))
    pairs = {(q1, q2) for q1 in c1 for q2 in c2}
    pairs.update((q, q) for q in c1 + c2)
    if not pairs:
        return 0.0, 0.0
    d1 = instance.demand_at(1, t)
    d2 = instance.demand_at(2, t)
    f_max = instance.network.f_max
    best_pair = None
    best_v = -math.inf
    for q1, q2 in sorted(pairs):
        v = q1 * d1 + q2 * d2 - f_max * abs(q2 - q1)
        v -= sum(_period_response(p, q1) for p in instance.producers_at(1))
        v -= sum(_period_response(p, q2) for p in instance.producers_at(2))
        if v > best_v + _TIE_TOL:
            best_v, best_pair = v, (q1, q2)
    return best_pair


def chp_price(instance: MarketInstance) -> PriceSystem:
    """Dual-maximizing (convex hull) prices by exact candidate enumeration.

    Periods decouple, so each is maximized independently. When the dual has
    a flat face of maximizers, the lexicographically smallest candidate
    vector is returned; that choice is surfaced via `tie_break`.
    """
    if instance.network.topology is Topology.TWO_NODE:
        rows: tuple[tuple[float, ...], ...] = tuple(
            zip(*(_chp_period_two_node(instance, t) for t in range(instance.periods))))
        if not rows:
            rows = ((), ())
    else:
        rows = (tuple(_chp_period_uninode(instance, t) for t in range(instance.periods)),)
    return PriceSystem(PriceMethod.CHP, rows,
                       tie_break="lexicographically smallest maximizing candidate")


def _select_from_interval(lo: float, hi: float) -> float:
    if math.isfinite(lo):
        return lo
    if math.isfinite(hi):
        return hi
    return 0.0


def marginal_price(instance: MarketInstance, dispatch: DispatchSolution) -> PriceSystem:
    """Prices supporting the optimal dispatch, producer by producer.

    Selects the lower endpoint of each node-period supporting interval
    (falling back to the upper endpoint when the lower is unbounded, and to
    zero when the period has no commitment at all). After selection, every
    producer's dispatched schedule is checked to be optimal among schedules
    with its commitment frozen; failure would mean the interval logic is
    wrong and raises ConsistencyError.
    """
    if not dispatch.feasible:
        raise ValueError("marginal prices need a feasible dispatch")
    fixed = dispatch_fixed_commitment(instance, dispatch.u_star)
    rows = tuple(
        tuple(_select_from_interval(lo, hi) for lo, hi in node)
        for node in fixed.price_intervals)
    price = PriceSystem(PriceMethod.MARGINAL, rows)
    for i, p in enumerate(instance.producers):
        prices = rows[p.node - 1]
        at_dispatch = standard_profit(p, prices, dispatch.u_star[i], dispatch.g_star[i])
        restricted = 0.0
        for t in range(instance.periods):
            if dispatch.u_star[i][t]:
                restricted += max((prices[t] - p.a) * p.g_min,
                                  (prices[t] - p.a) * p.g_max) - p.w
        if abs(at_dispatch - restricted) > MONEY_TOL:
            raise ConsistencyError(
                f"producer {p.id}: dispatched profit {at_dispatch!r} is not the "
                f"fixed-commitment maximum {restricted!r} at marginal prices")
    return price


def duality_gap(instance: MarketInstance) -> float:
    """Primal optimal cost minus the dual value at convex hull prices."""
    from .dispatch import solve_dispatch
    solution = solve_dispatch(instance)
    if not solution.feasible:
        raise InfeasibleInstanceError("duality gap undefined: instance is infeasible")
    price = chp_price(instance)
    return solution.f_star - dual_value(instance, price).value


def grid_scan_price(instance: MarketInstance, step: float = 0.01,
                    margin: float = 1.0) -> PriceSystem:
    """Brute-force uninode dual maximization over a uniform price grid.

    Independent oracle for chp_price: scans [min candidate - margin,
    max candidate + margin] at `step` spacing per period. The first grid
    point within MONEY_TOL of the maximum wins, so a flat top reports its
    left edge instead of wherever float rounding happens to peak.
    """
    if instance.network.topology is not Topology.UNINODE:
        raise ValueError("grid scan supports uninode instances only")
    cands = _price_candidates(instance.producers)
    if not cands:
        return PriceSystem(PriceMethod.GRID, ((0.0,) * instance.periods,))
    lo = cands[0] - margin
    hi = cands[-1] + margin
    n = int(round((hi - lo) / step)) + 1
    Q = lo + step * np.arange(n)
    response = np.zeros_like(Q)
    for p in instance.producers:
        online = np.maximum((Q - p.a) * p.g_min - p.w, (Q - p.a) * p.g_max - p.w)
        response += np.maximum(0.0, online)
    row = []
    for t in range(instance.periods):
        values = Q * instance.demand_at(1, t) - response
        first = int(np.argmax(values >= values.max() - MONEY_TOL))
        row.append(float(Q[first]))
    return PriceSystem(PriceMethod.GRID, (tuple(row),))
