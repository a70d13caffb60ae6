"""Producer and transmission-right profits, best responses, uplift accounting.

A producer facing prices q earns (q_t - a) g_t - w u_t per period; the
financial transmission right between the two nodes earns (q2_t - q1_t) F_t
over the flow box. Uplift for an entry is the gap between its best possible
profit and its profit at the centrally dispatched schedule. A redundant
constraint family adds a bonus term nu * N(x) to the objective; components
are duck-typed (see the redundant module) and must declare their output
kinks so the candidate enumeration here stays exact. A vectorized grid
guard cross-checks every family-aware best response and fails loudly if a
declared-kink enumeration ever misses the true maximum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance import MarketInstance, ProducerSpec, Topology
from .tolerances import BAL_TOL, MONEY_TOL

FTR_ID = "FTR(1->2)"


class KinkGuardError(RuntimeError):
    """A family component's declared kinks missed the profit maximum."""


class ConsistencyError(RuntimeError):
    """An arithmetic identity that must hold failed outside tolerance."""


@dataclass(frozen=True)
class BestResponse:
    """Profit-maximizing schedule for one entry at given prices.

    `profit` includes the scaled bonus; `standard_profit` and `bonus` split
    it. Producers fill u/g, the transmission right fills flow.
    """

    profit: float
    standard_profit: float
    bonus: float
    per_period: tuple[float, ...]
    u: tuple[int, ...] | None = None
    g: tuple[float, ...] | None = None
    flow: tuple[float, ...] | None = None

    def to_jsonable(self) -> dict:
        out = {
            "profit": self.profit,
            "standard_profit": self.standard_profit,
            "bonus": self.bonus,
            "per_period": list(self.per_period),
        }
        if self.flow is not None:
            out["F"] = list(self.flow)
        else:
            out["u"] = list(self.u) if self.u is not None else None
            out["g"] = list(self.g) if self.g is not None else None
        return out


def standard_profit(producer: ProducerSpec, prices: Sequence[float],
                    u: Sequence[int], g: Sequence[float]) -> float:
    return sum((prices[t] - producer.a) * g[t] - producer.w * u[t]
               for t in range(len(prices)))


def _closed_form_response(producer: ProducerSpec, prices: Sequence[float]) -> BestResponse:
    u, g, per = [], [], []
    for q in prices:
        best_v, best_u, best_g = 0.0, 0, 0.0
        for cand in (producer.g_min, producer.g_max):
            v = (q - producer.a) * cand - producer.w
            if v > best_v:
                best_v, best_u, best_g = v, 1, cand
        u.append(best_u)
        g.append(best_g)
        per.append(best_v)
    total = sum(per)
    return BestResponse(profit=total, standard_profit=total, bonus=0.0,
                        per_period=tuple(per), u=tuple(u), g=tuple(g))


def _online_candidates(producer: ProducerSpec, component, t: int) -> list[float]:
    vals = {producer.g_min, producer.g_max}
    if component is not None:
        for v in component.kink_outputs(t):
            if producer.g_min - BAL_TOL <= v <= producer.g_max + BAL_TOL:
                vals.add(min(max(v, producer.g_min), producer.g_max))
    return sorted(vals)


_GUARD_POINTS = {1: 1001, 2: 33, 3: 11}


def _guard_grid(lo: float, hi: float, extra: Sequence[float], periods: int) -> np.ndarray:
    base = np.linspace(lo, hi, _GUARD_POINTS.get(periods, 7))
    pts = np.unique(np.concatenate([base, np.asarray(list(extra), dtype=float)]))
    return pts[(pts >= lo - BAL_TOL) & (pts <= hi + BAL_TOL)]


def _guard_producer(producer: ProducerSpec, prices: Sequence[float], nu: float,
                    component, best: float) -> None:
    T = len(prices)
    q = np.asarray(prices, dtype=float)
    for u in itertools.product((0, 1), repeat=T):
        cols = []
        for t in range(T):
            if u[t]:
                extra = _online_candidates(producer, component, t)
                cols.append(_guard_grid(producer.g_min, producer.g_max, extra, T))
            else:
                cols.append(np.zeros(1))
        mesh = np.meshgrid(*cols, indexing="ij")
        G = np.stack([m.ravel() for m in mesh], axis=1)
        std = G @ (q - producer.a) - producer.w * sum(u)
        vals = std + nu * component.branch_values(u, G)
        worst = float(vals.max())
        if worst > best + MONEY_TOL:
            k = int(vals.argmax())
            raise KinkGuardError(
                f"producer {producer.id}: grid point u={u}, g={G[k].tolist()} "
                f"earns {worst:.9f} > enumerated best {best:.9f}; "
                "the family's declared kinks are incomplete")


def best_response(producer: ProducerSpec, prices: Sequence[float], nu: float = 0.0,
                  component=None, guard: bool = True) -> BestResponse:
    """Maximize (q - a) g - w u + nu * N over the gated box.

    Without a component this is the per-period closed form. With one, the
    maximum is taken over offline plus the component's declared kink
    outputs and box endpoints in every period; a grid guard then verifies
    the enumeration. Ties prefer offline over online and smaller output,
    lexicographically by period.
    """
    if component is None or nu == 0.0:
        resp = _closed_form_response(producer, prices)
        if component is None:
            return resp
        bonus = component.value(resp.u, resp.g)
        return BestResponse(profit=resp.profit, standard_profit=resp.standard_profit,
                            bonus=bonus, per_period=resp.per_period, u=resp.u, g=resp.g)
    T = len(prices)
    per_period_cands = []
    for t in range(T):
        cands = [(0, 0.0)]
        cands.extend((1, v) for v in _online_candidates(producer, component, t))
        per_period_cands.append(cands)
    best = None
    for combo in itertools.product(*per_period_cands):
        u = tuple(c[0] for c in combo)
        g = tuple(c[1] for c in combo)
        std = standard_profit(producer, prices, u, g)
        val = std + nu * component.value(u, g)
        if best is None or val > best[0]:
            best = (val, std, u, g)
    val, std, u, g = best
    if guard:
        _guard_producer(producer, prices, nu, component, val)
    per = tuple((prices[t] - producer.a) * g[t] - producer.w * u[t] for t in range(T))
    return BestResponse(profit=val, standard_profit=std, bonus=(val - std) / nu,
                        per_period=per, u=u, g=g)


def _guard_ftr(spread: np.ndarray, f_max: float, nu: float, component,
               best: float) -> None:
    T = len(spread)
    cols = []
    for t in range(T):
        extra = [0.0] + list(component.kink_flows(t))
        cols.append(_guard_grid(-f_max, f_max, extra, T))
    mesh = np.meshgrid(*cols, indexing="ij")
    F = np.stack([m.ravel() for m in mesh], axis=1)
    vals = F @ spread + nu * component.flow_values(F)
    worst = float(vals.max())
    if worst > best + MONEY_TOL:
        k = int(vals.argmax())
        raise KinkGuardError(
            f"transmission right: grid point F={F[k].tolist()} earns "
            f"{worst:.9f} > enumerated best {best:.9f}; "
            "the family's declared kinks are incomplete")


def ftr_best_response(prices_node1: Sequence[float], prices_node2: Sequence[float],
                      f_max: float, nu: float = 0.0, component=None,
                      guard: bool = True) -> BestResponse:
    """Maximize (q2 - q1)^T F + nu * N over the flow box; ties prefer F = 0."""
    T = len(prices_node1)
    spread = np.asarray([prices_node2[t] - prices_node1[t] for t in range(T)])
    if component is None or nu == 0.0:
        flow, per = [], []
        for s in spread:
            f = 0.0 if s == 0.0 else math.copysign(f_max, s)
            flow.append(f)
            per.append(s * f)
        total = float(sum(per))
        resp = BestResponse(profit=total, standard_profit=total, bonus=0.0,
                            per_period=tuple(float(v) for v in per), flow=tuple(flow))
        if component is None:
            return resp
        return BestResponse(profit=resp.profit, standard_profit=resp.standard_profit,
                            bonus=component.value(resp.flow), per_period=resp.per_period,
                            flow=resp.flow)
    per_period_cands = []
    for t in range(T):
        others = set()
        for v in component.kink_flows(t):
            if -f_max - BAL_TOL <= v <= f_max + BAL_TOL:
                others.add(min(max(v, -f_max), f_max))
        others |= {-f_max, f_max}
        others.discard(0.0)
        per_period_cands.append([0.0] + sorted(others))
    best = None
    for flow in itertools.product(*per_period_cands):
        std = float(np.dot(spread, flow))
        val = std + nu * component.value(flow)
        if best is None or val > best[0]:
            best = (val, std, flow)
    val, std, flow = best
    if guard:
        _guard_ftr(spread, f_max, nu, component, val)
    per = tuple(float(spread[t] * flow[t]) for t in range(T))
    return BestResponse(profit=val, standard_profit=std, bonus=(val - std) / nu,
                        per_period=per, flow=flow)


def profit_at_dispatch(instance: MarketInstance, dispatch, entry_id: str, price,
                       nu: float = 0.0, family=None) -> float:
    """Profit the entry actually earns at the dispatched schedule.

    `entry_id` is a producer id or FTR_ID; `price` is a PriceSystem-like
    object with a `prices` row per node. Includes nu times the entry's
    family bonus when a family is given.
    """
    if entry_id == FTR_ID and instance.network.topology is Topology.TWO_NODE:
        spread_profit = sum((price.prices[1][t] - price.prices[0][t]) * dispatch.flow_star[t]
                            for t in range(instance.periods))
        if family is not None and nu != 0.0 and family.ftr is not None:
            spread_profit += nu * family.ftr.value(dispatch.flow_star)
        return spread_profit
    producer = instance.producer(entry_id)
    idx = instance.producers.index(producer)
    prices = price.prices[producer.node - 1]
    value = standard_profit(producer, prices, dispatch.u_star[idx], dispatch.g_star[idx])
    if family is not None and nu != 0.0:
        comp = family.component(entry_id)
        value += nu * comp.value(dispatch.u_star[idx], dispatch.g_star[idx])
    return value


@dataclass(frozen=True)
class ProfitEntry:
    id: str
    kind: str  # "producer" | "ftr"
    profit_star: float
    profit_plus: float
    uplift: float

    def to_jsonable(self) -> dict:
        return {"id": self.id, "kind": self.kind, "profit_star": self.profit_star,
                "profit_plus": self.profit_plus, "uplift": self.uplift}


@dataclass(frozen=True)
class DecompositionCheck:
    """Total uplift must equal primal cost minus dual value minus the
    scaled family value at dispatch; kept as data so reports can show it."""

    f_star: float
    dual_value: float
    family_at_dispatch: float
    nu: float
    rhs: float

    def to_jsonable(self) -> dict:
        return {"f_star": self.f_star, "dual_value": self.dual_value,
                "family_at_dispatch": self.family_at_dispatch,
                "nu": self.nu, "rhs": self.rhs}


@dataclass(frozen=True)
class ProfitReport:
    nu: float
    price_method: str
    entries: tuple[ProfitEntry, ...]
    total_star: float
    total_plus: float
    total_uplift: float
    duality_gap_check: float
    decomposition: DecompositionCheck

    def to_jsonable(self) -> dict:
        return {
            "nu": self.nu,
            "price_method": self.price_method,
            "entries": [e.to_jsonable() for e in self.entries],
            "total_star": self.total_star,
            "total_plus": self.total_plus,
            "total_uplift": self.total_uplift,
            "duality_gap_check": self.duality_gap_check,
            "decomposition": self.decomposition.to_jsonable(),
        }


def _price_method_name(price) -> str:
    method = getattr(price, "method", "user")
    return getattr(method, "value", str(method))


def uplift_report(instance: MarketInstance, dispatch, price, nu: float = 0.0,
                  family=None) -> ProfitReport:
    """Per-entry profits at dispatch vs. best response, and the totals.

    Requires a feasible dispatch. The report carries two cross-checks: the
    standard duality gap at these prices (independent of nu) and the
    decomposition identity tying total uplift to primal cost, dual value,
    and the family's value at the dispatched schedule.
    """
    if not dispatch.feasible:
        raise ValueError("uplift accounting needs a feasible dispatch")
    if family is not None and family.prices != price.prices:
        raise ValueError("family was built at different prices; rebuild it for these")
    entries = []
    total_star = total_plus = 0.0
    demand_revenue = sum(np.dot(price.prices[n], instance.demand[n])
                         for n in range(instance.node_count))
    standard_plus_total = 0.0
    family_at_dispatch = 0.0
    for p in instance.producers:
        prices = price.prices[p.node - 1]
        comp = family.component(p.id) if family is not None else None
        br = best_response(p, prices, nu=nu, component=comp)
        star = profit_at_dispatch(instance, dispatch, p.id, price, nu=nu, family=family)
        standard_plus_total += best_response(p, prices).profit if (nu != 0.0 or comp) else br.profit
        if comp is not None:
            idx = instance.producers.index(p)
            family_at_dispatch += comp.value(dispatch.u_star[idx], dispatch.g_star[idx])
        entries.append(ProfitEntry(p.id, "producer", star, br.profit, br.profit - star))
        total_star += star
        total_plus += br.profit
    if instance.network.topology is Topology.TWO_NODE:
        comp = family.ftr if family is not None else None
        br = ftr_best_response(price.prices[0], price.prices[1],
                               instance.network.f_max, nu=nu, component=comp)
        star = profit_at_dispatch(instance, dispatch, FTR_ID, price, nu=nu, family=family)
        standard_plus_total += (ftr_best_response(price.prices[0], price.prices[1],
                                                  instance.network.f_max).profit
                                if (nu != 0.0 or comp) else br.profit)
        if comp is not None:
            family_at_dispatch += comp.value(dispatch.flow_star)
        entries.append(ProfitEntry(FTR_ID, "ftr", star, br.profit, br.profit - star))
        total_star += star
        total_plus += br.profit
    total_uplift = total_plus - total_star
    dual = demand_revenue - total_plus
    rhs = dispatch.f_star - dual - nu * family_at_dispatch
    gap_check = dispatch.f_star - (demand_revenue - standard_plus_total)
    decomposition = DecompositionCheck(dispatch.f_star, float(dual),
                                       family_at_dispatch, nu, float(rhs))
    if abs(total_uplift - rhs) > MONEY_TOL:
        raise ConsistencyError(
            f"uplift decomposition failed: total uplift {total_uplift!r} vs "
            f"f_star - dual - nu*family = {rhs!r}")
    return ProfitReport(
        nu=nu,
        price_method=_price_method_name(price),
        entries=tuple(entries),
        total_star=float(total_star),
        total_plus=float(total_plus),
        total_uplift=float(total_uplift),
        duality_gap_check=float(gap_check),
        decomposition=decomposition,
    )
