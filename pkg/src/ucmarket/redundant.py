"""Redundant constraint families that price away uplift.

A family attaches to each market entry a bonus function N built at fixed
prices p from an optimal dispatch: N(x) clips an anchored bonus arm against
the entry's lost-profit headroom,

    N(x) = min[ profit_plus - profit(p, x) ; uplift * gate(x) ],

where the gate equals 1 at the entry's dispatched schedule and decays per
the chosen variant: delta-exact (spike at the schedule), delta-commitment
(flat on the matching commitment branch), or continuous-ramp (flat at 1,
then declining linearly to 0 over a bounded width toward the end of the box
in the profit-increasing direction; a zero-slope period declines toward the
upper end by convention, and a zero-width period falls back to the spike).

So built, a family never raises any entry's best profit, pays exactly the
entry's uplift at the dispatched schedule, and is nonnegative everywhere;
verify_proposition checks those three conditions on a kink-aware grid, and
scaling the family by nu = 1 removes all uplift without moving the dual.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dispatch import (DispatchSolution, _grid_assignments, _symmetric_grid,
                       commitment_profiles)
from .instance import MarketInstance, Topology
from .profit import (FTR_ID, ConsistencyError, best_response,
                     ftr_best_response, standard_profit)
from .pricing import PriceSystem, dual_value
from .tolerances import BAL_TOL, MONEY_TOL, NU_CAP, NU_TOL, X_EPS


class GammaVariant(enum.Enum):
    DELTA_EXACT = "delta-exact"
    DELTA_COMMITMENT = "delta-commitment"
    CONTINUOUS_RAMP = "continuous-ramp"


@dataclass(frozen=True)
class GammaChoice:
    variant: GammaVariant
    ramp_cap: float = 50.0  # MWh; widest decline zone for continuous-ramp


@dataclass(frozen=True)
class ProducerComponent:
    """Bonus function for one producer, frozen at build prices."""

    producer_id: str
    variant: GammaVariant
    node: int
    a: float
    w: float
    g_min: float
    g_max: float
    periods: int
    build_prices: tuple[float, ...]
    u_star: tuple[int, ...]
    g_star: tuple[float, ...]
    profit_plus: float
    profit_star: float
    uplift: float
    ramp_width: tuple[float, ...] | None = None
    ramp_toward_max: tuple[bool, ...] | None = None

    def kink_outputs(self, t: int) -> tuple[float, ...]:
        if not self.u_star[t]:
            return ()
        out = [self.g_star[t]]
        if self.variant is GammaVariant.CONTINUOUS_RAMP and self.ramp_width[t] > 0:
            if self.ramp_toward_max[t]:
                out.append(self.g_max - self.ramp_width[t])
            else:
                out.append(self.g_min + self.ramp_width[t])
        return tuple(out)

    def _gate(self, u: Sequence[int], g: Sequence[float]) -> float:
        if self.variant is GammaVariant.DELTA_EXACT:
            same = all(u[t] == self.u_star[t]
                       and abs(g[t] - self.g_star[t]) <= X_EPS
                       for t in range(self.periods))
            return 1.0 if same else 0.0
        if self.variant is GammaVariant.DELTA_COMMITMENT:
            return 1.0 if tuple(u) == self.u_star else 0.0
        return min(self._phi(t, u[t], g[t]) for t in range(self.periods))

    def _phi(self, t: int, u_t: int, g_t: float) -> float:
        if self.u_star[t] == 0:
            return 1.0 if u_t == 0 else 0.0
        if u_t == 0:
            return 0.0
        W = self.ramp_width[t]
        if W <= 0:
            return 1.0 if abs(g_t - self.g_star[t]) <= X_EPS else 0.0
        if self.ramp_toward_max[t]:
            z = (self.g_max - g_t) / W
        else:
            z = (g_t - self.g_min) / W
        return min(1.0, max(0.0, z))

    def value(self, u: Sequence[int], g: Sequence[float]) -> float:
        headroom = self.profit_plus - standard_profit(
            _CostView(self.a, self.w), self.build_prices, u, g)
        return min(headroom, self.uplift * self._gate(u, g))

    def branch_values(self, u: Sequence[int], G: np.ndarray) -> np.ndarray:
        """Vectorized value over rows of G for one commitment branch."""
        p = np.asarray(self.build_prices)
        std = G @ (p - self.a) - self.w * sum(u)
        headroom = self.profit_plus - std
        if self.variant is GammaVariant.DELTA_EXACT:
            if tuple(u) != self.u_star:
                gate = np.zeros(G.shape[0])
            else:
                gate = np.all(np.abs(G - np.asarray(self.g_star)) <= X_EPS,
                              axis=1).astype(float)
        elif self.variant is GammaVariant.DELTA_COMMITMENT:
            gate = np.full(G.shape[0], 1.0 if tuple(u) == self.u_star else 0.0)
        else:
            gate = np.ones(G.shape[0])
            for t in range(self.periods):
                if self.u_star[t] == 0:
                    col = np.full(G.shape[0], 1.0 if u[t] == 0 else 0.0)
                elif u[t] == 0:
                    col = np.zeros(G.shape[0])
                else:
                    W = self.ramp_width[t]
                    if W <= 0:
                        col = (np.abs(G[:, t] - self.g_star[t]) <= X_EPS).astype(float)
                    elif self.ramp_toward_max[t]:
                        col = np.clip((self.g_max - G[:, t]) / W, 0.0, 1.0)
                    else:
                        col = np.clip((G[:, t] - self.g_min) / W, 0.0, 1.0)
                gate = np.minimum(gate, col)
        return np.minimum(headroom, self.uplift * gate)

    def to_jsonable(self) -> dict:
        out = {
            "id": self.producer_id,
            "variant": self.variant.value,
            "node": self.node,
            "u_star": list(self.u_star),
            "g_star": list(self.g_star),
            "profit_plus": self.profit_plus,
            "profit_star": self.profit_star,
            "uplift": self.uplift,
            "kinks": [list(self.kink_outputs(t)) for t in range(self.periods)],
        }
        if self.variant is GammaVariant.CONTINUOUS_RAMP:
            out["ramp"] = {"widths": list(self.ramp_width),
                           "toward_max": list(self.ramp_toward_max)}
        return out


@dataclass(frozen=True)
class _CostView:
    """Minimal producer stand-in so standard_profit can price a component."""

    a: float
    w: float


@dataclass(frozen=True)
class FtrComponent:
    """Bonus function for the node-1 to node-2 transmission right."""

    variant: GammaVariant
    f_max: float
    periods: int
    build_prices_node1: tuple[float, ...]
    build_prices_node2: tuple[float, ...]
    f_star: tuple[float, ...]
    profit_plus: float
    profit_star: float
    uplift: float
    ramp_width: tuple[float, ...] | None = None
    ramp_toward_max: tuple[bool, ...] | None = None

    @property
    def _spread(self) -> tuple[float, ...]:
        return tuple(q2 - q1 for q1, q2 in
                     zip(self.build_prices_node1, self.build_prices_node2))

    def kink_flows(self, t: int) -> tuple[float, ...]:
        out = [self.f_star[t]]
        if self.variant is GammaVariant.CONTINUOUS_RAMP and self.ramp_width[t] > 0:
            if self.ramp_toward_max[t]:
                out.append(self.f_max - self.ramp_width[t])
            else:
                out.append(-self.f_max + self.ramp_width[t])
        return tuple(out)

    def _phi(self, t: int, f_t: float) -> float:
        W = self.ramp_width[t]
        if W <= 0:
            return 1.0 if abs(f_t - self.f_star[t]) <= X_EPS else 0.0
        if self.ramp_toward_max[t]:
            z = (self.f_max - f_t) / W
        else:
            z = (f_t + self.f_max) / W
        return min(1.0, max(0.0, z))

    def _gate(self, F: Sequence[float]) -> float:
        if self.variant is GammaVariant.DELTA_EXACT:
            same = all(abs(F[t] - self.f_star[t]) <= X_EPS for t in range(self.periods))
            return 1.0 if same else 0.0
        if self.variant is GammaVariant.DELTA_COMMITMENT:
            # the right has no commitment dimension, so the gate is always on
            return 1.0
        return min(self._phi(t, F[t]) for t in range(self.periods))

    def value(self, F: Sequence[float]) -> float:
        std = sum(s * f for s, f in zip(self._spread, F))
        return min(self.profit_plus - std, self.uplift * self._gate(F))

    def flow_values(self, F: np.ndarray) -> np.ndarray:
        spread = np.asarray(self._spread)
        headroom = self.profit_plus - F @ spread
        if self.variant is GammaVariant.DELTA_EXACT:
            gate = np.all(np.abs(F - np.asarray(self.f_star)) <= X_EPS,
                          axis=1).astype(float)
        elif self.variant is GammaVariant.DELTA_COMMITMENT:
            gate = np.ones(F.shape[0])
        else:
            gate = np.ones(F.shape[0])
            for t in range(self.periods):
                W = self.ramp_width[t]
                if W <= 0:
                    col = (np.abs(F[:, t] - self.f_star[t]) <= X_EPS).astype(float)
                elif self.ramp_toward_max[t]:
                    col = np.clip((self.f_max - F[:, t]) / W, 0.0, 1.0)
                else:
                    col = np.clip((F[:, t] + self.f_max) / W, 0.0, 1.0)
                gate = np.minimum(gate, col)
        return np.minimum(headroom, self.uplift * gate)

    def to_jsonable(self) -> dict:
        out = {
            "id": FTR_ID,
            "variant": self.variant.value,
            "f_star": list(self.f_star),
            "profit_plus": self.profit_plus,
            "profit_star": self.profit_star,
            "uplift": self.uplift,
            "kinks": [list(self.kink_flows(t)) for t in range(self.periods)],
        }
        if self.variant is GammaVariant.CONTINUOUS_RAMP:
            out["ramp"] = {"widths": list(self.ramp_width),
                           "toward_max": list(self.ramp_toward_max)}
        return out


@dataclass(frozen=True)
class RedundantFamily:
    gamma: GammaChoice
    price_method: str
    prices: tuple[tuple[float, ...], ...]
    producer_components: tuple[ProducerComponent, ...]
    ftr: FtrComponent | None

    def component(self, producer_id: str) -> ProducerComponent:
        for c in self.producer_components:
            if c.producer_id == producer_id:
                return c
        raise KeyError(producer_id)

    @property
    def total_uplift(self) -> float:
        total = sum(c.uplift for c in self.producer_components)
        if self.ftr is not None:
            total += self.ftr.uplift
        return total

    def to_jsonable(self) -> dict:
        return {
            "gamma": {"variant": self.gamma.variant.value,
                      "ramp_cap": self.gamma.ramp_cap},
            "price_method": self.price_method,
            "prices": {f"node{n + 1}": list(row) for n, row in enumerate(self.prices)},
            "producers": [c.to_jsonable() for c in self.producer_components],
            "ftr": self.ftr.to_jsonable() if self.ftr is not None else None,
            "total_uplift": self.total_uplift,
        }


def build_family(instance: MarketInstance, dispatch: DispatchSolution,
                 price: PriceSystem, gamma: GammaChoice) -> RedundantFamily:
    """Construct the family at these prices from this dispatch.

    Components are price-specific: every consumer of the family (profit
    bonuses, dual evaluation, verification) must use the same prices the
    family was built at.
    """
    if not dispatch.feasible:
        raise ValueError("family construction needs a feasible dispatch")
    if len(price.prices) != instance.node_count or any(
            len(row) != instance.periods for row in price.prices):
        raise ValueError("price shape does not match the instance")
    comps = []
    for i, p in enumerate(instance.producers):
        prices = price.prices[p.node - 1]
        plus = best_response(p, prices).profit
        star = standard_profit(p, prices, dispatch.u_star[i], dispatch.g_star[i])
        uplift = plus - star
        if uplift < -MONEY_TOL:
            raise ConsistencyError(
                f"producer {p.id}: dispatched profit exceeds the best response")
        uplift = max(0.0, uplift)
        widths = toward = None
        if gamma.variant is GammaVariant.CONTINUOUS_RAMP:
            widths_l, toward_l = [], []
            for t in range(instance.periods):
                if dispatch.u_star[i][t]:
                    g_t = dispatch.g_star[i][t]
                    widths_l.append(min(p.g_max - g_t, g_t - p.g_min, gamma.ramp_cap))
                    toward_l.append(prices[t] - p.a >= 0)
                else:
                    widths_l.append(0.0)
                    toward_l.append(True)
            widths, toward = tuple(widths_l), tuple(toward_l)
        comps.append(ProducerComponent(
            producer_id=p.id, variant=gamma.variant, node=p.node,
            a=p.a, w=p.w, g_min=p.g_min, g_max=p.g_max, periods=instance.periods,
            build_prices=tuple(prices), u_star=tuple(dispatch.u_star[i]),
            g_star=tuple(dispatch.g_star[i]), profit_plus=plus, profit_star=star,
            uplift=uplift, ramp_width=widths, ramp_toward_max=toward))
    ftr = None
    if instance.network.topology is Topology.TWO_NODE:
        rows1, rows2 = price.prices
        f_max = instance.network.f_max
        plus = ftr_best_response(rows1, rows2, f_max).profit
        star = sum((rows2[t] - rows1[t]) * dispatch.flow_star[t]
                   for t in range(instance.periods))
        uplift = max(0.0, plus - star)
        widths = toward = None
        if gamma.variant is GammaVariant.CONTINUOUS_RAMP:
            widths_l, toward_l = [], []
            for t in range(instance.periods):
                f_t = dispatch.flow_star[t]
                widths_l.append(min(f_max - f_t, f_t + f_max, gamma.ramp_cap))
                toward_l.append(rows2[t] - rows1[t] >= 0)
            widths, toward = tuple(widths_l), tuple(toward_l)
        ftr = FtrComponent(
            variant=gamma.variant, f_max=f_max, periods=instance.periods,
            build_prices_node1=tuple(rows1), build_prices_node2=tuple(rows2),
            f_star=tuple(dispatch.flow_star), profit_plus=plus, profit_star=star,
            uplift=uplift, ramp_width=widths, ramp_toward_max=toward)
    method = getattr(price.method, "value", str(price.method))
    return RedundantFamily(gamma=gamma, price_method=method,
                           prices=tuple(tuple(r) for r in price.prices),
                           producer_components=tuple(comps), ftr=ftr)


def evaluate_component(family: RedundantFamily, entry_id: str, x) -> float:
    """Evaluate one entry's bonus at a schedule (u, g) or a flow vector.

    The point must lie inside the entry's own feasibility box; points
    outside raise ValueError since the bonus is undefined there.
    """
    if entry_id == FTR_ID:
        if family.ftr is None:
            raise KeyError(entry_id)
        F = tuple(float(v) for v in x)
        if len(F) != family.ftr.periods:
            raise ValueError("flow vector length does not match the horizon")
        for f in F:
            if abs(f) > family.ftr.f_max + BAL_TOL:
                raise ValueError(f"flow {f} outside the transfer bound")
        return family.ftr.value(F)
    comp = family.component(entry_id)
    u, g = x
    u = tuple(int(v) for v in u)
    g = tuple(float(v) for v in g)
    if len(u) != comp.periods or len(g) != comp.periods:
        raise ValueError("schedule length does not match the horizon")
    for t in range(comp.periods):
        if u[t] not in (0, 1):
            raise ValueError("commitment entries must be 0 or 1")
        if u[t] == 0:
            if abs(g[t]) > BAL_TOL:
                raise ValueError(f"period {t}: offline output must be 0, got {g[t]}")
        elif not (comp.g_min - BAL_TOL <= g[t] <= comp.g_max + BAL_TOL):
            raise ValueError(f"period {t}: output {g[t]} outside "
                             f"[{comp.g_min}, {comp.g_max}]")
    return comp.value(u, g)


# ---------------------------------------------------------------------------
# aggregation of user-supplied constraint families


@dataclass(frozen=True)
class ConstraintComponent:
    """One priced constraint h(x) <= 0 for one entry, with declared kinks."""

    fn: Callable[..., float]
    kinks: tuple[tuple[float, ...], ...]  # per period


@dataclass(frozen=True)
class AggregatedComponent:
    """Weighted sum sigma^T h of one entry's constraint stack."""

    sigma: tuple[float, ...]
    parts: tuple[ConstraintComponent, ...]

    def value(self, *x) -> float:
        return sum(s * c.fn(*x) for s, c in zip(self.sigma, self.parts))

    def kink_outputs(self, t: int) -> tuple[float, ...]:
        out: list[float] = []
        for c in self.parts:
            out.extend(c.kinks[t])
        return tuple(sorted(set(out)))

    kink_flows = kink_outputs

    def as_bonus(self) -> "NegatedComponent":
        """Profit-bonus view: priced slack -sigma^T h (relaxation pays for
        violating the redundant cuts, so the bonus is the negated value)."""
        return NegatedComponent(self)


@dataclass(frozen=True)
class NegatedComponent:
    base: AggregatedComponent

    def value(self, *x) -> float:
        return -self.base.value(*x)

    def kink_outputs(self, t: int) -> tuple[float, ...]:
        return self.base.kink_outputs(t)

    kink_flows = kink_outputs

    def branch_values(self, u, G: np.ndarray) -> np.ndarray:
        return np.asarray([self.value(tuple(u), tuple(row)) for row in G])

    def flow_values(self, F: np.ndarray) -> np.ndarray:
        return np.asarray([self.value(tuple(row)) for row in F])


def aggregate_constraints(sigma_plus: Sequence[float],
                          entries: dict[str, Sequence[ConstraintComponent]]
                          ) -> dict[str, AggregatedComponent]:
    """Collapse K priced constraint families into one component per entry."""
    sigma = tuple(float(s) for s in sigma_plus)
    if any(s < 0 for s in sigma):
        raise ValueError("aggregation weights must be nonnegative")
    out = {}
    for entry_id, parts in entries.items():
        parts = tuple(parts)
        if len(parts) != len(sigma):
            raise ValueError(f"entry {entry_id!r}: expected {len(sigma)} "
                             f"components, got {len(parts)}")
        out[entry_id] = AggregatedComponent(sigma=sigma, parts=parts)
    return out


# ---------------------------------------------------------------------------
# rearranging a family with negative lobes into a nonnegative one


class RearrangementError(ValueError):
    """The family's summed minima are negative; no constant shift fixes it."""


@dataclass(frozen=True)
class OffsetComponent:
    """A component plus a constant; delegates everything else to the base."""

    base: object
    offset: float

    def value(self, *x) -> float:
        return self.base.value(*x) + self.offset

    # fall back to scalar evaluation for bases without vectorized paths
    def branch_values(self, u, G: np.ndarray) -> np.ndarray:
        return _evaluate_branch(self.base, u, G) + self.offset

    def flow_values(self, F: np.ndarray) -> np.ndarray:
        return _evaluate_flows(self.base, F) + self.offset

    def __getattr__(self, name: str):
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)


_MIN_GRID_POINTS = 101


def _producer_columns(comp, u: Sequence[int], points: int = _MIN_GRID_POINTS):
    cols = []
    for t in range(comp.periods):
        if u[t]:
            pts = [np.linspace(comp.g_min, comp.g_max, points),
                   np.asarray([comp.g_min, comp.g_max], dtype=float),
                   np.asarray(comp.kink_outputs(t), dtype=float)]
            merged = np.unique(np.concatenate(pts))
            merged = merged[(merged >= comp.g_min - BAL_TOL)
                            & (merged <= comp.g_max + BAL_TOL)]
            cols.append(np.clip(merged, comp.g_min, comp.g_max))
        else:
            cols.append(np.zeros(1))
    return cols


def _flow_columns(comp, points: int = _MIN_GRID_POINTS):
    cols = []
    for t in range(comp.periods):
        pts = [np.linspace(-comp.f_max, comp.f_max, points),
               np.asarray([0.0, -comp.f_max, comp.f_max], dtype=float),
               np.asarray(comp.kink_flows(t), dtype=float)]
        merged = np.unique(np.concatenate(pts))
        merged = merged[(merged >= -comp.f_max - BAL_TOL)
                        & (merged <= comp.f_max + BAL_TOL)]
        cols.append(np.clip(merged, -comp.f_max, comp.f_max))
    return cols


def _mesh(cols) -> np.ndarray:
    mesh = np.meshgrid(*cols, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _evaluate_branch(comp, u, G: np.ndarray) -> np.ndarray:
    if hasattr(comp, "branch_values"):
        return np.asarray(comp.branch_values(u, G))
    return np.asarray([comp.value(tuple(u), tuple(row)) for row in G])


def _evaluate_flows(comp, F: np.ndarray) -> np.ndarray:
    if hasattr(comp, "flow_values"):
        return np.asarray(comp.flow_values(F))
    return np.asarray([comp.value(tuple(row)) for row in F])


def component_minimum(comp) -> tuple[float, dict]:
    """Grid minimum of a component over its own box, with the witness point.

    Producer-like components (kink_outputs plus a gated box) are scanned on
    every commitment branch; flow-like components (kink_flows plus f_max)
    over the flow box. The grid is kink-aware: declared kinks, endpoints,
    and a uniform sweep per period.
    """
    if hasattr(comp, "kink_flows") and not hasattr(comp, "kink_outputs"):
        F = _mesh(_flow_columns(comp))
        vals = _evaluate_flows(comp, F)
        k = int(np.argmin(vals))
        return float(vals[k]), {"F": [float(v) for v in F[k]]}
    best = None
    for u in itertools.product((0, 1), repeat=comp.periods):
        G = _mesh(_producer_columns(comp, u))
        vals = _evaluate_branch(comp, u, G)
        k = int(np.argmin(vals))
        if best is None or vals[k] < best[0]:
            best = (float(vals[k]), {"u": list(u), "g": [float(v) for v in G[k]]})
    return best


def rearrange_nonnegative(components: Sequence) -> "RearrangedComponents":
    """Shift a family with negative lobes into a pointwise-nonnegative one.

    Entries with negative minima are lifted to zero; the total lift is paid
    for by scaling down the nonnegative entries in proportion to their own
    minima, so the sum of all components is unchanged at every point. This
    requires the summed minima to be nonnegative; otherwise no constant
    shifts can work and RearrangementError reports the minima as witnesses.
    """
    comps = list(components)
    minima = []
    witnesses = []
    for c in comps:
        m, wit = component_minimum(c)
        minima.append(m)
        witnesses.append(wit)
    s_minus = sum(m for m in minima if m < 0)
    s_plus = sum(m for m in minima if m >= 0)
    if s_minus + s_plus < -MONEY_TOL:
        detail = ", ".join(f"[{k}] min {m:.9f} at {w}"
                           for k, (m, w) in enumerate(zip(minima, witnesses)))
        raise RearrangementError(
            f"summed minima {s_minus + s_plus:.9f} < 0; no constant rearrangement "
            f"is nonnegative ({detail})")
    ratio = (s_minus / s_plus) if s_plus > 0 else 0.0
    offsets = []
    for m in minima:
        if m < 0:
            offsets.append(-m)
        else:
            offsets.append(ratio * m)
    shifted = tuple(OffsetComponent(base=c, offset=o) if o != 0.0 else c
                    for c, o in zip(comps, offsets))
    return RearrangedComponents(components=shifted, minima=tuple(minima),
                                offsets=tuple(offsets))


@dataclass(frozen=True)
class RearrangedComponents:
    components: tuple
    minima: tuple[float, ...]
    offsets: tuple[float, ...]


# ---------------------------------------------------------------------------
# verification of the elimination guarantee


@dataclass(frozen=True)
class EntryVerification:
    entry_id: str
    profit_plus: float
    grid_profit_max: float
    max_preserved: bool
    max_witness: dict
    value_at_dispatch: float
    uplift: float
    anchored: bool
    grid_min: float
    nonnegative: bool
    min_witness: dict

    @property
    def passed(self) -> bool:
        return self.max_preserved and self.anchored and self.nonnegative

    def to_jsonable(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "profit_plus": self.profit_plus,
            "grid_profit_max": self.grid_profit_max,
            "max_preserved": self.max_preserved,
            "max_witness": self.max_witness,
            "value_at_dispatch": self.value_at_dispatch,
            "uplift": self.uplift,
            "anchored": self.anchored,
            "grid_min": self.grid_min,
            "nonnegative": self.nonnegative,
            "min_witness": self.min_witness,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    entries: tuple[EntryVerification, ...]
    sum_of_minima: float
    sum_of_minima_ok: bool
    omega_checked: int
    omega_min: float
    omega_ok: bool
    omega_witness: dict | None

    def to_jsonable(self) -> dict:
        return {
            "passed": self.passed,
            "entries": [e.to_jsonable() for e in self.entries],
            "sum_of_minima": self.sum_of_minima,
            "sum_of_minima_ok": self.sum_of_minima_ok,
            "omega_checked": self.omega_checked,
            "omega_min": self.omega_min,
            "omega_ok": self.omega_ok,
            "omega_witness": self.omega_witness,
        }


def _verify_producer(comp: ProducerComponent) -> EntryVerification:
    p = np.asarray(comp.build_prices)
    best_profit = None
    best_min = None
    for u in itertools.product((0, 1), repeat=comp.periods):
        G = _mesh(_producer_columns(comp, u))
        std = G @ (p - comp.a) - comp.w * sum(u)
        N = comp.branch_values(u, G)
        total = std + N
        k = int(np.argmax(total))
        if best_profit is None or total[k] > best_profit[0]:
            best_profit = (float(total[k]),
                           {"u": list(u), "g": [float(v) for v in G[k]]})
        k = int(np.argmin(N))
        if best_min is None or N[k] < best_min[0]:
            best_min = (float(N[k]), {"u": list(u), "g": [float(v) for v in G[k]]})
    at_dispatch = comp.value(comp.u_star, comp.g_star)
    return EntryVerification(
        entry_id=comp.producer_id,
        profit_plus=comp.profit_plus,
        grid_profit_max=best_profit[0],
        max_preserved=abs(best_profit[0] - comp.profit_plus) <= MONEY_TOL,
        max_witness=best_profit[1],
        value_at_dispatch=at_dispatch,
        uplift=comp.uplift,
        anchored=abs(at_dispatch - comp.uplift) <= MONEY_TOL,
        grid_min=best_min[0],
        nonnegative=best_min[0] >= -MONEY_TOL,
        min_witness=best_min[1],
    )


def _verify_ftr(comp: FtrComponent) -> EntryVerification:
    spread = np.asarray(comp._spread)
    F = _mesh(_flow_columns(comp))
    std = F @ spread
    N = comp.flow_values(F)
    total = std + N
    k_max = int(np.argmax(total))
    k_min = int(np.argmin(N))
    at_dispatch = comp.value(comp.f_star)
    return EntryVerification(
        entry_id=FTR_ID,
        profit_plus=comp.profit_plus,
        grid_profit_max=float(total[k_max]),
        max_preserved=abs(float(total[k_max]) - comp.profit_plus) <= MONEY_TOL,
        max_witness={"F": [float(v) for v in F[k_max]]},
        value_at_dispatch=at_dispatch,
        uplift=comp.uplift,
        anchored=abs(at_dispatch - comp.uplift) <= MONEY_TOL,
        grid_min=float(N[k_min]),
        nonnegative=float(N[k_min]) >= -MONEY_TOL,
        min_witness={"F": [float(v) for v in F[k_min]]},
    )


def _omega_points(instance: MarketInstance, dispatch: DispatchSolution,
                  grid_step: float, cap: int, per_period_cap: int = 16):
    """Balance-feasible whole-market points on the grid, dispatch first."""
    two_node = instance.network.topology is Topology.TWO_NODE
    yield dispatch.u_star, dispatch.g_star, dispatch.flow_star
    count = 1

    def period_configs(u, t):
        committed = [(p, i) for i, p in enumerate(instance.producers) if u[i][t]]
        if two_node:
            units1 = [(p, i) for p, i in committed if p.node == 1]
            units2 = [(p, i) for p, i in committed if p.node == 2]
            for f in _symmetric_grid(instance.network.f_max, grid_step):
                for a1 in _grid_assignments(units1, instance.demand_at(1, t) + f, grid_step):
                    for a2 in _grid_assignments(units2, instance.demand_at(2, t) - f, grid_step):
                        yield {**a1, **a2}, f
        else:
            for a in _grid_assignments(committed, instance.demand_at(1, t), grid_step):
                yield a, None

    n = len(instance.producers)
    for u in commitment_profiles(instance):
        per_period = [list(itertools.islice(period_configs(u, t), per_period_cap))
                      for t in range(instance.periods)]
        if any(not configs for configs in per_period):
            continue
        for combo in itertools.product(*per_period):
            g = tuple(tuple(combo[t][0].get(i, 0.0) for t in range(instance.periods))
                      for i in range(n))
            F = tuple(combo[t][1] for t in range(instance.periods)) if two_node else None
            yield u, g, F
            count += 1
            if count >= cap:
                return


def verify_proposition(family: RedundantFamily, instance: MarketInstance,
                       dispatch: DispatchSolution, price: PriceSystem,
                       grid_step: float = 1.0, omega_cap: int = 512) -> VerificationReport:
    """Check the elimination guarantee on a kink-aware grid.

    Per entry: the bonus-augmented profit maximum must equal the standard
    best profit, the bonus at the dispatched schedule must equal the
    entry's uplift, and the bonus must be nonnegative everywhere. On top,
    the summed per-entry minima and a sample of balance-feasible market
    points must have a nonnegative family sum. Witnesses are the first
    (lexicographically smallest) offending or binding points.
    """
    if price.prices != family.prices:
        raise ValueError("verification must use the prices the family was built at")
    if not dispatch.feasible:
        raise ValueError("verification needs a feasible dispatch")
    entries = [_verify_producer(c) for c in family.producer_components]
    if family.ftr is not None:
        entries.append(_verify_ftr(family.ftr))
    sum_minima = sum(e.grid_min for e in entries)
    sum_ok = sum_minima >= -MONEY_TOL
    omega_min = math.inf
    omega_witness = None
    checked = 0
    for u, g, F in _omega_points(instance, dispatch, grid_step, omega_cap):
        total = sum(c.value(u[i], g[i])
                    for i, c in enumerate(family.producer_components))
        if family.ftr is not None and F is not None:
            total += family.ftr.value(F)
        checked += 1
        if total < omega_min:
            omega_min = total
            omega_witness = {"u": [list(r) for r in u],
                             "g": [[float(v) for v in r] for r in g],
                             "F": list(F) if F is not None else None,
                             "sum": float(total)}
    omega_ok = checked == 0 or omega_min >= -MONEY_TOL
    passed = all(e.passed for e in entries) and sum_ok and omega_ok
    return VerificationReport(
        passed=passed,
        entries=tuple(entries),
        sum_of_minima=float(sum_minima),
        sum_of_minima_ok=sum_ok,
        omega_checked=checked,
        omega_min=float(omega_min) if checked else 0.0,
        omega_ok=omega_ok,
        omega_witness=omega_witness,
    )


# ---------------------------------------------------------------------------
# scaling scan


@dataclass(frozen=True)
class NuPoint:
    nu: float
    dual: float
    total_uplift: float

    def to_jsonable(self) -> dict:
        return {"nu": self.nu, "dual": self.dual, "total_uplift": self.total_uplift}


@dataclass(frozen=True)
class NuAnalysis:
    nu_max: float
    cap_reached: bool
    dual_at_zero: float
    gap_invariant: bool
    curve: tuple[NuPoint, ...]

    def to_jsonable(self) -> dict:
        return {
            "nu_max": self.nu_max,
            "cap_reached": self.cap_reached,
            "dual_at_zero": self.dual_at_zero,
            "gap_invariant": self.gap_invariant,
            "curve": [pt.to_jsonable() for pt in self.curve],
        }


def _total_uplift_at(instance: MarketInstance, family: RedundantFamily,
                     nu: float) -> float:
    """Total uplift at scale nu, from the family's stored dispatch profits."""
    total = 0.0
    for comp in family.producer_components:
        p = instance.producer(comp.producer_id)
        br = best_response(p, comp.build_prices, nu=nu, component=comp)
        star = comp.profit_star + nu * comp.value(comp.u_star, comp.g_star)
        total += br.profit - star
    if family.ftr is not None:
        c = family.ftr
        br = ftr_best_response(c.build_prices_node1, c.build_prices_node2,
                               c.f_max, nu=nu, component=c)
        star = c.profit_star + nu * c.value(c.f_star)
        total += br.profit - star
    return total


def nu_analysis(instance: MarketInstance, price: PriceSystem,
                family: RedundantFamily, nu_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)
                ) -> NuAnalysis:
    """Scan the family's scale: dual invariance range and the uplift curve.

    nu_max is the largest scale (bisected to width 1e-6, capped at 64) at
    which the dual value stays within tolerance of the standard dual; a
    family that never degrades the dual reports cap_reached instead of a
    boundary claim.
    """
    if price.prices != family.prices:
        raise ValueError("scaling scan must use the prices the family was built at")
    dual0 = dual_value(instance, price).value

    def holds(nu: float) -> bool:
        return dual_value(instance, price, nu=nu, family=family).value >= dual0 - MONEY_TOL

    if holds(NU_CAP):
        nu_max, cap_reached = NU_CAP, True
    else:
        lo, hi = 0.0, NU_CAP
        while hi - lo > NU_TOL:
            mid = 0.5 * (lo + hi)
            if holds(mid):
                lo = mid
            else:
                hi = mid
        nu_max, cap_reached = lo, False
    curve = []
    for nu in nu_grid:
        d = dual_value(instance, price, nu=nu, family=family).value
        curve.append(NuPoint(nu=float(nu), dual=d,
                             total_uplift=_total_uplift_at(instance, family, nu)))
    dual1 = dual_value(instance, price, nu=1.0, family=family).value
    return NuAnalysis(
        nu_max=nu_max,
        cap_reached=cap_reached,
        dual_at_zero=dual0,
        gap_invariant=abs(dual1 - dual0) <= MONEY_TOL,
        curve=tuple(curve),
    )
