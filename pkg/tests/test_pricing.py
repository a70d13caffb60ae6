import random

import pytest

from ucmarket import (
    InfeasibleInstanceError,
    MarketInstance,
    NetworkSpec,
    PriceMethod,
    ProducerSpec,
    Topology,
    chp_price,
    dual_value,
    duality_gap,
    grid_scan_price,
    marginal_price,
    solve_dispatch,
    user_price,
)
from ucmarket.tolerances import MONEY_TOL
from tests.conftest import random_prices


def test_reference_chp_prices(reference):
    price = chp_price(reference)
    assert price.method is PriceMethod.CHP
    assert price.prices[0][0] == pytest.approx(15.1, abs=1e-12)
    assert price.prices[1][0] == pytest.approx(10.0, abs=1e-12)
    assert price.tie_break


def test_reference_dual_and_gap(reference):
    price = chp_price(reference)
    ev = dual_value(reference, price)
    assert ev.value == pytest.approx(2010.0, abs=MONEY_TOL)
    assert duality_gap(reference) == pytest.approx(260.0, abs=MONEY_TOL)


def test_reference_marginal_prices(reference):
    sol = solve_dispatch(reference)
    price = marginal_price(reference, sol)
    assert price.prices == ((15.0,), (10.0,))
    # at these prices the line rents alone account for the whole FTR response
    ev = dual_value(reference, price)
    assert ev.value == pytest.approx(2000.0, abs=MONEY_TOL)
    assert ev.ftr_response.profit == pytest.approx(250.0, abs=MONEY_TOL)


def test_merit_pair_gap_closes(merit_pair):
    price = chp_price(merit_pair)
    assert price.prices == ((15.0,),)
    assert dual_value(merit_pair, price).value == pytest.approx(1750.0)
    assert duality_gap(merit_pair) == pytest.approx(0.0, abs=MONEY_TOL)
    sol = solve_dispatch(merit_pair)
    assert marginal_price(merit_pair, sol).prices == ((15.0,),)


def test_forced_unit_prices(forced_unit):
    assert chp_price(forced_unit).prices == ((10.0,),)
    assert duality_gap(forced_unit) == pytest.approx(0.0, abs=MONEY_TOL)
    sol = solve_dispatch(forced_unit)
    # supporting interval is the whole line; the degenerate fallback picks 0
    assert marginal_price(forced_unit, sol).prices == ((0.0,),)


def test_colocated_pair_chp(colocated_pair):
    price = chp_price(colocated_pair)
    assert price.prices == ((10.0,),)
    assert duality_gap(colocated_pair) == pytest.approx(0.0, abs=MONEY_TOL)


def test_grid_scan_agrees_with_chp(colocated_pair, merit_pair, cent_pool_50):
    for inst in [colocated_pair, merit_pair] + cent_pool_50[:10]:
        got = chp_price(inst)
        scan = grid_scan_price(inst, step=0.01)
        for t in range(inst.periods):
            assert abs(got.prices[0][t] - scan.prices[0][t]) <= 0.01 + 1e-9


def test_grid_scan_rejects_two_node(reference):
    with pytest.raises(ValueError):
        grid_scan_price(reference)


def test_weak_duality(pool_200):
    rng = random.Random(5)
    for inst in pool_200[:50]:
        f_star = solve_dispatch(inst).f_star
        for _ in range(3):
            price = user_price(inst, random_prices(rng, inst))
            assert dual_value(inst, price).value <= f_star + MONEY_TOL


def test_dual_concavity_probe(pool_200):
    rng = random.Random(6)
    for inst in pool_200[:25]:
        qa = random_prices(rng, inst)
        qb = random_prices(rng, inst)
        lam = rng.random()
        mid = tuple(tuple(lam * a + (1 - lam) * b for a, b in zip(ra, rb))
                    for ra, rb in zip(qa, qb))
        va = dual_value(inst, user_price(inst, qa)).value
        vb = dual_value(inst, user_price(inst, qb)).value
        vm = dual_value(inst, user_price(inst, mid)).value
        assert vm >= lam * va + (1 - lam) * vb - MONEY_TOL


def test_dual_at_zero_prices_vanishes(pool_200):
    for inst in pool_200[:30]:
        zero = user_price(inst, tuple((0.0,) * inst.periods
                                      for _ in range(inst.node_count)))
        assert dual_value(inst, zero).value == 0.0


def test_chp_dominates_marginal_dual(pool_200):
    # convex hull prices maximize the dual, so no marginal price can beat them
    for inst in pool_200[:40]:
        sol = solve_dispatch(inst)
        chp = dual_value(inst, chp_price(inst)).value
        mar = dual_value(inst, marginal_price(inst, sol)).value
        assert chp >= mar - MONEY_TOL


def test_chp_tie_prefers_smallest_candidate():
    # the dual is flat between 5 and 9 here; both candidates attain 500
    inst = MarketInstance(
        periods=1, demand=((100.0,),),
        producers=(ProducerSpec("G0", 1, 0.0, 100.0, 5.0, 0.0),
                   ProducerSpec("G1", 1, 0.0, 100.0, 9.0, 0.0)),
        network=NetworkSpec(Topology.UNINODE))
    price = chp_price(inst)
    assert price.prices == ((5.0,),)
    assert dual_value(inst, price).value == pytest.approx(500.0)


def test_duality_gap_requires_feasibility():
    inst = MarketInstance(
        periods=1, demand=((50.0,),),
        producers=(ProducerSpec("G", 1, 100.0, 200.0, 1.0, 0.0),),
        network=NetworkSpec(Topology.UNINODE))
    with pytest.raises(InfeasibleInstanceError):
        duality_gap(inst)


def test_user_price_shape_check(reference):
    with pytest.raises(ValueError):
        user_price(reference, ((1.0,),))
    with pytest.raises(ValueError):
        user_price(reference, ((1.0, 2.0), (3.0, 4.0)))


def test_price_jsonable(reference):
    doc = chp_price(reference).to_jsonable()
    assert doc["method"] == "chp"
    assert doc["prices"]["node1"] == [pytest.approx(15.1)]
    assert doc["prices"]["node2"] == [10.0]


def test_marginal_needs_feasible_dispatch():
    inst = MarketInstance(
        periods=1, demand=((50.0,),),
        producers=(ProducerSpec("G", 1, 100.0, 200.0, 1.0, 0.0),),
        network=NetworkSpec(Topology.UNINODE))
    with pytest.raises(ValueError):
        marginal_price(inst, solve_dispatch(inst))
