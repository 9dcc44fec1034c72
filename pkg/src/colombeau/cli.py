"""Command-line front end: catalogs, scenarios, machine-readable reports.

Subcommands: mollifier, classify, associate, demo, verify-net.  Reports are
JSON (verdicts) or CSV (plot-ready scan curves); report bodies are
deterministic for a fixed configuration, so byte-identical reruns are the
expected behavior.  Wall time goes to stderr, never into the body.

Exit codes: 0 success, 2 construction error, 3 parse error, 4 unknown
scenario, 5 quadrature failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, is_dataclass

import numpy as np

from . import catalog
from .association import associate, check_product_compat
from .asymptotics import (
    CompactRegion,
    EpsGrid,
    check_moderate_rn,
    check_negligible_rn,
    noderiv_shortcut,
)
from .distributions import DeltaAt, LinComb, pair
from .dsl import DslParseError, parse_expression
from .functions import UnsupportedOrderError
from .genfunc import EvalContext, Iota, Product, evaluate
from .manifold import (
    EscalatingNet,
    GeneralizedLie,
    IotaM,
    OrdinaryLie,
    ProductM,
    Regular,
    SmoothingKernelNet,
    associate_m,
    evaluate_m,
    generalized_lie,
    iota_m,
    lie_derivative_dist_s1,
    ordinary_lie,
    pair_net,
    sigma_m,
    verify_delta_net,
)
from .mollifier import (
    MollifierConstructionError,
    build_mollifier,
    cached_mollifier,
    moments,
)
from .quadrature import QuadratureError, integrate

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_CONSTRUCTION = 2
EXIT_PARSE = 3
EXIT_UNKNOWN_SCENARIO = 4
EXIT_QUADRATURE = 5

DEMO_NAMES = (
    "heaviside-squared",
    "heaviside-times-delta",
    "delta-squared",
    "x-times-delta",
    "lie-commutation",
    "covariant-association",
    "circle-product-compat",
)


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        d = {"type": type(obj).__name__}
        d.update({k: _jsonable(v) for k, v in asdict(obj).items()})
        return d
    if isinstance(obj, (np.floating, np.integer)):
        return float(obj)
    if isinstance(obj, float) and (obj != obj):  # nan
        return None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def make_report(command: str, config: dict, rows, extra=None) -> dict:
    body = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _jsonable(config),
        "rows": _jsonable(rows),
    }
    if extra:
        body.update(_jsonable(extra))
    return body


def emit(report, args, csv_rows=None, csv_header=None):
    """Write the report body; CSV when asked and scan rows exist."""
    if args.format == "csv" and csv_rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(csv_header)
        for row in csv_rows:
            writer.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _grid_from(args) -> EpsGrid:
    return EpsGrid(args.eps_max, args.eps_min, args.eps_count)


def _add_common(p):
    p.add_argument("--eps-min", type=float, default=1e-3)
    p.add_argument("--eps-max", type=float, default=1e-1)
    p.add_argument("--eps-count", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)


# ---------------------------------------------------------------------------
# subcommands


def cmd_mollifier(args) -> int:
    phi = build_mollifier(args.q, args.strict)
    max_order = args.max_moment if args.max_moment is not None else args.q + 2
    table = moments(phi, max_order)
    rows = [{"i": i, "moment": m_i} for i, m_i in enumerate(table)]
    csv_rows, header = None, None
    if args.samples:
        ts = np.linspace(-1, 1, args.samples)
        header = ("t", "phi", "dphi")
        csv_rows = [(float(t), float(phi(t)), float(phi(t, 1))) for t in ts]
    report = make_report(
        "mollifier",
        {"q": args.q, "strict": args.strict, "max_moment": max_order},
        rows,
        extra={"l1_norm": phi.norm_l1(), "sup_norm": phi.norm_sup(),
               "support_radius": phi.support_radius},
    )
    emit(report, args, csv_rows, header)
    return EXIT_OK


def cmd_classify(args) -> int:
    expr = parse_expression(args.expr)
    K = CompactRegion(args.region[0], args.region[1])
    grid = _grid_from(args)
    schedule = tuple(int(q) for q in args.q_schedule.split(","))
    moderate = check_moderate_rn(expr, K, k_max=args.k_max, grid=grid)
    rows = [{"section": "moderate", "k": list(r.k), "N": r.n_certified,
             "slopes": list(r.slopes), "residuals": list(r.residuals)}
            for r in moderate.rows]
    negligible = None
    if moderate.certified:
        negligible = noderiv_shortcut(expr, K, args.m_target, schedule, moderate, grid=grid)
        rows += [{"section": "negligible", "m": r.m, "k": list(r.k),
                  "witness_q": r.witness_q, "slope": r.slope, "residual": r.residual}
                 for r in negligible.rows]
    csv_rows = [(e, k[0] if len(k) == 1 else str(k), v, q)
                for (e, k, v, q) in (moderate.scan_rows + (negligible.scan_rows if negligible else ()))]
    report = make_report(
        "classify",
        {"expr": args.expr, "region": args.region, "k_max": args.k_max,
         "m_target": args.m_target, "q_schedule": list(schedule),
         "grid": asdict(grid)},
        rows,
        extra={"moderate_certified": moderate.certified,
               "negligible_certified": bool(negligible and negligible.certified),
               "note": "finite-grid evidence with the named mollifiers; "
                       "universal quantifiers are corroborated, not proved"},
    )
    emit(report, args, csv_rows, ("eps", "k", "sup_value", "q"))
    return EXIT_OK


def cmd_associate(args) -> int:
    expr = parse_expression(args.expr)
    candidate = catalog.distribution(args.candidate) if args.candidate else None
    if args.candidate_weight != 1.0 and candidate is not None:
        candidate = LinComb(((args.candidate_weight, candidate),))
    psis = [catalog.test_function(n) for n in args.psi.split(",")]
    mollifiers = [cached_mollifier(int(q), True) for q in args.orders.split(",")]
    report_obj = associate(expr, psis, mollifiers, eps_min=args.eps_min,
                           candidate=candidate, tol=args.tol)
    report = make_report(
        "associate",
        {"expr": args.expr, "candidate": args.candidate,
         "candidate_weight": args.candidate_weight, "psi": args.psi,
         "orders": args.orders, "eps_min": args.eps_min, "tol": args.tol},
        report_obj.cases,
        extra={"verdict": report_obj.verdict},
    )
    emit(report, args)
    return EXIT_OK


def cmd_verify_net(args) -> int:
    if args.escalating:
        net = EscalatingNet()
    else:
        net = SmoothingKernelNet(cached_mollifier(args.q, True))
    fs = [catalog.smooth_function("sin"), catalog.smooth_function("cos")]
    us = [("delta@pi/2", DeltaAt((catalog.parse_angle("pi/2"),))),
          ("regular-cos", Regular(catalog.smooth_function("cos")))]
    Xs = [catalog.circle_field("const-1"), catalog.circle_field("sin-theta")]
    mus = [catalog.circle_form("two-plus-cos"), catalog.circle_form("uniform")]
    grid = _grid_from(args)
    rep = verify_delta_net(net, fs, us, Xs, grid=grid, m_max=args.m_max,
                           k_max=args.k_max, mu_forms=mus)
    report = make_report(
        "verify-net",
        {"q": None if args.escalating else args.q, "escalating": args.escalating,
         "m_max": args.m_max, "k_max": args.k_max, "grid": asdict(grid)},
        rep.rows,
        extra={"passed": rep.passed, "net": rep.net},
    )
    emit(report, args)
    return EXIT_OK


def _demo_assoc_config(args):
    psis = [catalog.test_function("bump"), catalog.test_function("poly-bump")]
    mollifiers = [cached_mollifier(q, True) for q in (0, 2, 4)]
    return psis, mollifiers


def cmd_demo(args) -> int:
    name = args.name
    if name not in DEMO_NAMES:
        print(f"unknown demo {name!r}; available: {', '.join(DEMO_NAMES)}",
              file=sys.stderr)
        return EXIT_UNKNOWN_SCENARIO
    psis, mollifiers = _demo_assoc_config(args)
    extra = {}
    if name == "heaviside-squared":
        H = catalog.distribution("heaviside@0")
        F = Product(Iota(H), Iota(H))
        rep = associate(F, psis, mollifiers, eps_min=args.eps_min,
                        candidate=H, tol=args.tol)
    elif name == "heaviside-times-delta":
        H = catalog.distribution("heaviside@0")
        d = catalog.distribution("delta@0")
        F = Product(Iota(H), Iota(d))
        rep = associate(F, psis, mollifiers, eps_min=args.eps_min,
                        candidate=LinComb(((0.5, d),)), tol=args.tol)
        extra["oracle"] = "int phi (1 - Phi) dt = 1/2 for any unit-mass phi"
    elif name == "delta-squared":
        d = catalog.distribution("delta@0")
        F = Product(Iota(d), Iota(d))
        rep = associate(F, psis, mollifiers, eps_min=args.eps_min,
                        candidate=None, tol=args.tol)
        scaled = []
        for m in mollifiers:
            phi_sq = float(integrate(lambda t: np.asarray(m(t))**2, -1, 1, tol=1e-12))
            ctxv = [c for c in rep.cases if c.phi_order == m.order_q]
            for c in ctxv:
                scaled.append({
                    "phi_order": m.order_q, "psi": c.psi,
                    "eps_times_pairing": c.pairings[-1] * c.eps_values[-1],
                    "psi0_times_int_phi2": phi_sq * _psi_at_zero(c.psi, psis),
                })
        extra["eps_scaled_limit"] = scaled
    elif name == "x-times-delta":
        rep = check_product_compat(
            "smooth-dist", catalog.smooth_function("x"),
            catalog.distribution("delta@0"), psis, mollifiers,
            eps_min=args.eps_min, tol=args.tol)
    elif name == "lie-commutation":
        net = SmoothingKernelNet(cached_mollifier(2, True))
        u = DeltaAt((catalog.parse_angle("pi/2"),))
        X = catalog.circle_field("sin-theta")
        eps = 1e-2
        xs = np.linspace(0, 2 * np.pi, 65)[:-1]
        lhs = evaluate_m(generalized_lie(iota_m(u), X), net, eps, xs)
        rhs = evaluate_m(iota_m(lie_derivative_dist_s1(u, X)), net, eps, xs)
        dev = float(np.max(np.abs(lhs - rhs)))
        report = make_report(
            "demo", {"name": name, "eps": eps},
            [{"max_pointwise_deviation": dev, "tolerance": 1e-7,
              "passed": dev <= 1e-7}],
            extra={"identity": "generalized Lie derivative commutes with the "
                               "embedding, per eps"},
        )
        emit(report, args)
        return EXIT_OK
    elif name == "covariant-association":
        net = SmoothingKernelNet(cached_mollifier(4, True))
        u = DeltaAt((catalog.parse_angle("pi/2"),))
        X = catalog.circle_field("sin-theta")
        F = ordinary_lie(iota_m(u), X)
        cand = lie_derivative_dist_s1(u, X)
        mus = [catalog.circle_form("two-plus-cos"),
               catalog.circle_form("one-plus-halfsin2")]
        rep = associate_m(F, mus, [net], eps_min=args.eps_min,
                          candidate=cand, tol=args.tol)
    else:  # circle-product-compat
        net = SmoothingKernelNet(cached_mollifier(2, True))
        f = catalog.smooth_function("cos")
        u = DeltaAt((catalog.parse_angle("pi/2"),))
        F = ProductM(iota_m(Regular(f)), iota_m(u))
        from .distributions import SmoothMultiple
        cand = SmoothMultiple(f, u)
        mus = [catalog.circle_form("two-plus-cos"), catalog.circle_form("uniform")]
        rep = associate_m(F, mus, [net], eps_min=args.eps_min,
                          candidate=cand, tol=args.tol)
    report = make_report(
        "demo", {"name": name, "eps_min": args.eps_min, "tol": args.tol},
        rep.cases, extra={"verdict": rep.verdict, **extra},
    )
    emit(report, args)
    return EXIT_OK


def _psi_at_zero(psi_name, psis):
    for p in psis:
        if p.name == psi_name:
            return float(p.value(np.asarray([0.0]))[0])
    return float("nan")


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="colombeau",
        description="Numerical laboratory for generalized functions: build "
                    "mollifiers, classify expressions, compute association "
                    "limits, verify delta nets on the circle.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mollifier", help="build and certify a mollifier")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--max-moment", type=int, default=None)
    p.add_argument("--samples", type=int, default=0,
                   help="dump this many profile samples as CSV rows")
    _add_common(p)
    p.set_defaults(func=cmd_mollifier)

    p = sub.add_parser("classify", help="moderateness/negligibility verdicts")
    p.add_argument("expr", help='prefix DSL, e.g. "sub(iota(sin), sigma(sin))"')
    p.add_argument("--k-max", type=int, default=1)
    p.add_argument("--m-target", type=int, default=4)
    p.add_argument("--q-schedule", default="0,1,2,3,4,5")
    p.add_argument("--region", type=float, nargs=2, default=(-1.0, 1.0))
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("associate", help="weak-limit association verdict")
    p.add_argument("expr")
    p.add_argument("--candidate", default=None)
    p.add_argument("--candidate-weight", type=float, default=1.0)
    p.add_argument("--psi", default="bump,poly-bump")
    p.add_argument("--orders", default="0,2,4")
    _add_common(p)
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("demo", help="named scenarios with built-in oracles")
    p.add_argument("name")
    _add_common(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("verify-net", help="delta-net conditions on the circle")
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--escalating", action="store_true")
    p.add_argument("--m-max", type=int, default=5)
    p.add_argument("--k-max", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=cmd_verify_net)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except DslParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (MollifierConstructionError, UnsupportedOrderError, ValueError) as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except QuadratureError as exc:
        print(f"quadrature failure: {exc} (last estimate {exc.last_estimate})",
              file=sys.stderr)
        return EXIT_QUADRATURE
    print(f"wall time: {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
