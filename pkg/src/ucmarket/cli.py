"""Command line front end.

Exit codes: 0 success, 1 invalid input (bad JSON, schema, validation, or
usage), 2 infeasible instance, 3 verification failure in eliminate/verify.
"""

from __future__ import annotations

import argparse
import sys

from .dispatch import solve_dispatch
from .instance import InstanceError, parse_instance_file
from .pricing import PriceMethod, chp_price, marginal_price
from .profit import uplift_report
from .redundant import (GammaChoice, GammaVariant, build_family, nu_analysis,
                        verify_proposition)
from .serialize import canonical_json, profit_report_csv
from .tolerances import MONEY_TOL

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFICATION = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucmarket",
        description="Clear, price, and de-uplift small unit-commitment markets.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method=False, gamma=False, nu_grid=False):
        p.add_argument("--instance", required=True, help="instance JSON file")
        if method:
            p.add_argument("--method", choices=["marginal", "chp"], default="chp",
                           help="pricing method (default chp)")
        if gamma:
            p.add_argument("--gamma", choices=[v.value for v in GammaVariant],
                           default=GammaVariant.CONTINUOUS_RAMP.value,
                           help="family gating variant")
        if nu_grid:
            p.add_argument("--nu-grid", default="0,0.25,0.5,0.75,1",
                           help="comma-separated scales for the curve")
        p.add_argument("--format", choices=["json", "text", "csv"], default="text")
        p.add_argument("--out", help="write the report here instead of stdout")

    common(sub.add_parser("solve", help="least-cost commitment and dispatch"))
    common(sub.add_parser("price", help="derive prices"), method=True)
    common(sub.add_parser("uplift", help="uplift accounting at given prices"),
           method=True)
    common(sub.add_parser("eliminate",
                          help="build a family, verify it, and re-account at scale 1"),
           method=True, gamma=True)
    common(sub.add_parser("verify", help="verify a family's guarantees"),
           method=True, gamma=True)
    common(sub.add_parser("nu-scan", help="scan the family scale"),
           method=True, gamma=True, nu_grid=True)
    return parser


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _money(x: float) -> str:
    return f"${x:,.2f}"


def _text_solution(solution) -> str:
    if not solution.feasible:
        return "infeasible: no commitment can serve the demand\n"
    lines = [f"optimal cost: {_money(solution.f_star)}"]
    for i, row in enumerate(solution.u_star):
        lines.append(f"  unit {i}: u={list(row)} g={[round(v, 4) for v in solution.g_star[i]]}")
    if solution.flow_star is not None:
        lines.append(f"  flow 1->2: {[round(v, 4) for v in solution.flow_star]}")
    return "\n".join(lines) + "\n"


def _text_price(price) -> str:
    lines = [f"method: {price.method.value}"]
    for n, row in enumerate(price.prices, start=1):
        lines.append(f"  node{n}: {[round(v, 4) for v in row]}")
    if price.tie_break:
        lines.append(f"  tie break: {price.tie_break}")
    return "\n".join(lines) + "\n"


def _text_report(report) -> str:
    lines = [f"uplift report (nu={report.nu:g}, prices={report.price_method})"]
    for e in report.entries:
        lines.append(f"  {e.id:<12} star {_money(e.profit_star):>12}  "
                     f"best {_money(e.profit_plus):>12}  uplift {_money(e.uplift):>12}")
    lines.append(f"  total uplift: {_money(report.total_uplift)}")
    lines.append(f"  duality gap at these prices: {_money(report.duality_gap_check)}")
    return "\n".join(lines) + "\n"


def _text_verification(report) -> str:
    lines = []
    for e in report.entries:
        status = "ok" if e.passed else "FAIL"
        lines.append(f"  {e.entry_id:<12} [{status}] max {e.grid_profit_max:.6f} "
                     f"vs {e.profit_plus:.6f}; at dispatch {e.value_at_dispatch:.6f} "
                     f"vs uplift {e.uplift:.6f}; min {e.grid_min:.6f}")
    lines.append(f"  family sum: per-entry minima {report.sum_of_minima:.6f}, "
                 f"sampled {report.omega_checked} points, min {report.omega_min:.6f}")
    lines.insert(0, "verification PASSED" if report.passed else "verification FAILED")
    return "\n".join(lines) + "\n"


def _text_nu(analysis) -> str:
    lines = [f"nu_max: {analysis.nu_max:.6f}"
             + (" (cap reached)" if analysis.cap_reached else ""),
             f"dual at nu=0: {_money(analysis.dual_at_zero)}",
             f"dual unchanged at nu=1: {'yes' if analysis.gap_invariant else 'NO'}"]
    for pt in analysis.curve:
        lines.append(f"  nu={pt.nu:g}: dual {_money(pt.dual)}, "
                     f"total uplift {_money(pt.total_uplift)}")
    return "\n".join(lines) + "\n"


def _price_for(args, instance, solution):
    if args.method == "marginal":
        return marginal_price(instance, solution)
    return chp_price(instance)


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        instance = parse_instance_file(args.instance)
    except OSError as exc:
        print(f"error: cannot read instance: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.format == "csv" and args.command not in ("uplift", "eliminate"):
        print("error: csv format is only available for uplift and eliminate",
              file=sys.stderr)
        return EXIT_INVALID

    solution = solve_dispatch(instance)
    if args.command == "solve":
        if args.format == "json":
            _write(canonical_json(solution.to_jsonable()), args.out)
        else:
            _write(_text_solution(solution), args.out)
        if not solution.feasible:
            print("error: instance is infeasible", file=sys.stderr)
            return EXIT_INFEASIBLE
        return EXIT_OK
    if not solution.feasible:
        print("error: instance is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE

    price = _price_for(args, instance, solution)
    if args.command == "price":
        _write(canonical_json(price.to_jsonable()) if args.format == "json"
               else _text_price(price), args.out)
        return EXIT_OK

    if args.command == "uplift":
        report = uplift_report(instance, solution, price)
        if args.format == "json":
            _write(canonical_json(report.to_jsonable()), args.out)
        elif args.format == "csv":
            _write(profit_report_csv(report), args.out)
        else:
            _write(_text_report(report), args.out)
        return EXIT_OK

    gamma = GammaChoice(GammaVariant(args.gamma))
    family = build_family(instance, solution, price, gamma)

    if args.command == "verify":
        report = verify_proposition(family, instance, solution, price)
        _write(canonical_json(report.to_jsonable()) if args.format == "json"
               else _text_verification(report), args.out)
        return EXIT_OK if report.passed else EXIT_VERIFICATION

    if args.command == "eliminate":
        verification = verify_proposition(family, instance, solution, price)
        before = uplift_report(instance, solution, price)
        after = uplift_report(instance, solution, price, nu=1.0, family=family)
        ok = verification.passed and after.total_uplift <= MONEY_TOL
        if args.format == "json":
            doc = {
                "price": price.to_jsonable(),
                "family": family.to_jsonable(),
                "verification": verification.to_jsonable(),
                "before": before.to_jsonable(),
                "after": after.to_jsonable(),
                "eliminated": ok,
            }
            _write(canonical_json(doc), args.out)
        elif args.format == "csv":
            _write(profit_report_csv(after), args.out)
        else:
            text = (_text_price(price) + _text_report(before)
                    + _text_verification(verification) + _text_report(after)
                    + ("uplift eliminated\n" if ok else "uplift NOT eliminated\n"))
            _write(text, args.out)
        return EXIT_OK if ok else EXIT_VERIFICATION

    # nu-scan
    try:
        nu_grid = [float(v) for v in args.nu_grid.split(",") if v.strip() != ""]
    except ValueError:
        print(f"error: cannot parse --nu-grid {args.nu_grid!r}", file=sys.stderr)
        return EXIT_INVALID
    analysis = nu_analysis(instance, price, family, nu_grid)
    _write(canonical_json(analysis.to_jsonable()) if args.format == "json"
           else _text_nu(analysis), args.out)
    return EXIT_OK


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
