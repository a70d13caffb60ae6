import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucmarket import (
    FTR_ID,
    GammaChoice,
    GammaVariant,
    KinkGuardError,
    ProducerSpec,
    best_response,
    build_family,
    chp_price,
    ftr_best_response,
    marginal_price,
    profit_at_dispatch,
    solve_dispatch,
    standard_profit,
    uplift_report,
    user_price,
)
from ucmarket.tolerances import MONEY_TOL


def test_best_response_reference_values(reference):
    p1, p2 = reference.producers
    # just above average cost at full output: the 0.1 margin covers w exactly
    r = best_response(p1, (15.1,))
    assert r.profit == pytest.approx(0.0, abs=1e-12)
    assert (r.u, r.g) == ((0,), (0.0,))
    r = best_response(p1, (15.2,))
    assert r.profit == pytest.approx(20.0)
    assert (r.u, r.g) == ((1,), (200.0,))
    r = best_response(p2, (10.0,))
    assert r.profit == 0.0
    assert (r.u, r.g) == ((0,), (0.0,))
    r = best_response(p2, (12.0,))
    assert r.profit == pytest.approx(400.0)
    assert r.g == (200.0,)


def test_best_response_offline_tie_preferred():
    p = ProducerSpec("G", 1, 0.0, 100.0, 10.0, 0.0)
    r = best_response(p, (10.0,))
    # every schedule earns zero; offline wins the tie
    assert (r.profit, r.u, r.g) == (0.0, (0,), (0.0,))


def test_best_response_multi_period_independent():
    p = ProducerSpec("G", 1, 20.0, 80.0, 10.0, 100.0)
    r = best_response(p, (14.0, 8.0))
    # period 1: 4*80-100 positive; period 2 would lose money
    assert r.u == (1, 0)
    assert r.g == (80.0, 0.0)
    assert r.profit == pytest.approx(220.0)
    assert r.per_period == (pytest.approx(220.0), 0.0)


def test_ftr_reference_value(reference):
    r = ftr_best_response((15.1,), (10.0,), 50.0)
    assert r.profit == pytest.approx(255.0)
    assert r.flow == (-50.0,)


def test_ftr_zero_spread_keeps_line_idle():
    r = ftr_best_response((12.0,), (12.0,), 50.0)
    assert r.profit == 0.0
    assert r.flow == (0.0,)


def test_standard_profit_reference(reference):
    p1 = reference.producer("P1")
    assert standard_profit(p1, (15.1,), (1,), (150.0,)) == pytest.approx(-5.0)
    assert standard_profit(p1, (15.1,), (0,), (0.0,)) == 0.0


def test_profit_at_dispatch_reference(reference):
    sol = solve_dispatch(reference)
    price = chp_price(reference)
    assert profit_at_dispatch(reference, sol, "P1", price) == pytest.approx(-5.0)
    assert profit_at_dispatch(reference, sol, "P2", price) == 0.0
    assert profit_at_dispatch(reference, sol, FTR_ID, price) == 0.0
    fam = build_family(reference, sol, price,
                       GammaChoice(GammaVariant.CONTINUOUS_RAMP))
    assert profit_at_dispatch(reference, sol, "P1", price, nu=1.0, family=fam) \
        == pytest.approx(0.0, abs=MONEY_TOL)


def test_uplift_report_reference_chp(reference):
    sol = solve_dispatch(reference)
    report = uplift_report(reference, sol, chp_price(reference))
    by_id = {e.id: e for e in report.entries}
    assert by_id["P1"].uplift == pytest.approx(5.0, abs=MONEY_TOL)
    assert by_id["P2"].uplift == 0.0
    assert by_id[FTR_ID].uplift == pytest.approx(255.0, abs=MONEY_TOL)
    assert report.total_uplift == pytest.approx(260.0, abs=MONEY_TOL)
    assert report.duality_gap_check == pytest.approx(260.0, abs=MONEY_TOL)
    assert by_id[FTR_ID].kind == "ftr"


def test_uplift_report_reference_marginal(reference):
    sol = solve_dispatch(reference)
    report = uplift_report(reference, sol, marginal_price(reference, sol))
    by_id = {e.id: e.uplift for e in report.entries}
    assert by_id["P1"] == pytest.approx(20.0, abs=MONEY_TOL)
    assert by_id["P2"] == 0.0
    assert by_id[FTR_ID] == pytest.approx(250.0, abs=MONEY_TOL)
    assert report.total_uplift == pytest.approx(270.0, abs=MONEY_TOL)


def test_decomposition_identity_across_scales(reference):
    sol = solve_dispatch(reference)
    price = chp_price(reference)
    fam = build_family(reference, sol, price,
                       GammaChoice(GammaVariant.CONTINUOUS_RAMP))
    for nu in (0.0, 0.25, 0.5, 1.0):
        report = uplift_report(reference, sol, price, nu=nu, family=fam)
        d = report.decomposition
        assert d.rhs == pytest.approx(report.total_uplift, abs=MONEY_TOL)
        assert report.total_uplift == pytest.approx(260.0 * (1 - nu), abs=MONEY_TOL)


def test_uplift_nonnegative_on_pool(pool_200):
    for inst in pool_200[:40]:
        sol = solve_dispatch(inst)
        report = uplift_report(inst, sol, chp_price(inst))
        for e in report.entries:
            assert e.uplift >= -MONEY_TOL


def test_report_csv_totals(reference):
    from ucmarket import profit_report_csv
    sol = solve_dispatch(reference)
    report = uplift_report(reference, sol, chp_price(reference))
    csv = profit_report_csv(report)
    lines = csv.strip().splitlines()
    assert lines[0] == "id,kind,profit_star,profit_plus,uplift"
    assert lines[-1].startswith("TOTAL,")
    assert lines[-1].endswith("260.000000000")


@settings(max_examples=120, deadline=None)
@given(
    q=st.floats(-30, 60),
    a=st.floats(0, 40),
    w=st.floats(0, 300),
    g_min=st.floats(0, 80),
    span=st.floats(0, 120),
)
def test_closed_form_matches_dense_grid(q, a, w, g_min, span):
    p = ProducerSpec("G", 1, g_min, g_min + span, a, w)
    r = best_response(p, (q,))
    grid = np.linspace(p.g_min, p.g_max, 1001)
    online = float(np.max((q - a) * grid)) - w
    brute = max(0.0, online)
    lipschitz = abs(q - a) * (span / 1000 if span else 0.0)
    assert r.profit >= brute - 1e-9
    assert r.profit <= brute + lipschitz + 1e-9


@settings(max_examples=60, deadline=None)
@given(
    s1=st.floats(-20, 20), s2=st.floats(-20, 20),
    f_max=st.floats(0, 100),
)
def test_ftr_closed_form_matches_grid(s1, s2, f_max):
    r = ftr_best_response((0.0, 0.0), (s1, s2), f_max)
    grid = np.linspace(-f_max, f_max, 801)
    brute = float(np.max(s1 * grid)) + float(np.max(s2 * grid))
    assert r.profit == pytest.approx(brute, abs=1e-7 * max(1.0, abs(brute)))


class _LyingComponent:
    """Declares no kinks but hides a spike: the guard must catch it."""

    def __init__(self, g_spike):
        self.g_spike = g_spike

    def kink_outputs(self, t):
        return set()

    def value(self, u, g):
        return 1000.0 if u[0] and abs(g[0] - self.g_spike) < 0.06 else 0.0

    def branch_values(self, u, G):
        out = np.zeros(G.shape[0])
        if u[0]:
            out[np.abs(G[:, 0] - self.g_spike) < 0.06] = 1000.0
        return out


def test_kink_guard_catches_undeclared_spike():
    p = ProducerSpec("G", 1, 0.0, 100.0, 10.0, 0.0)
    # 50.0 sits on the 1001-point audit grid but not among the candidates
    with pytest.raises(KinkGuardError):
        best_response(p, (10.0,), nu=1.0, component=_LyingComponent(50.0))


def test_guard_can_be_disabled():
    p = ProducerSpec("G", 1, 0.0, 100.0, 10.0, 0.0)
    r = best_response(p, (10.0,), nu=1.0, component=_LyingComponent(50.0),
                      guard=False)
    assert r.profit == 0.0  # silently wrong, which is why the guard defaults on


def test_profit_at_dispatch_unknown_entry(reference):
    sol = solve_dispatch(reference)
    with pytest.raises(KeyError):
        profit_at_dispatch(reference, sol, "nobody", chp_price(reference))


def test_report_rejects_family_built_at_other_prices(reference):
    sol = solve_dispatch(reference)
    price = chp_price(reference)
    other = user_price(reference, ((14.0,), (9.0,)))
    fam = build_family(reference, sol, other,
                       GammaChoice(GammaVariant.CONTINUOUS_RAMP))
    with pytest.raises(ValueError):
        uplift_report(reference, sol, price, nu=1.0, family=fam)
