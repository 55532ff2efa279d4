"""Command-line orchestration: reduce, derive, verify, solve, compat.

Exit code 0 means the requested pipeline completed (a failing published case
is a completed run, not an error); diagnostics go to stderr with a nonzero
exit.  `--json` output is deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .algsolve import (
    SolveConfig,
    candidate_to_json,
    load_candidate,
    solve_numeric,
    verify_candidate,
)
from .compat import (
    fixtures_root,
    render_markdown,
    run_case,
    run_compat,
    _DerivationCache,
    default_z_samples,
)
from .errors import MedaError
from .expr_core import eval_complex, parse_expr, pretty, render
from .pde_frontend import parse_problem
from .pipeline import NonIntegerBalanceError, derive_system, reduce_problem
from .solution_builder import assemble_solution
from .verify import GridSpec, ode_residual, pde_residual


def _common_flags(parser):
    parser.add_argument("--json", action="store_true", help="emit JSON instead of text")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument("--tol", type=float, default=1e-10, help="numeric tolerance")
    parser.add_argument(
        "--grid", type=str, default=None, help="residual grid 'x0:x1:nx,t0:t1:nt'"
    )


def _parse_assignments(text):
    out = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise MedaError(f"expected NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        try:
            out[name.strip()] = complex(value.strip())
        except ValueError:
            raise MedaError(f"bad numeric value {value.strip()!r}") from None
    return out


def _emit(payload, as_json):
    if as_json:
        print(json.dumps(payload, sort_keys=True))


# ---------------------------------------------------------------------------


def cmd_reduce(args) -> int:
    problem = parse_problem(args.problem)
    constants = None
    if args.constants:
        declared = set(problem.parameters) | {"C1", "C2"}
        constants = [
            parse_expr(c.strip(), declared) for c in args.constants.split(",")
        ]
    ode, steps = reduce_problem(
        problem,
        integrate=args.integrate,
        constants=constants,
        eliminate_unknown=args.eliminate,
    )
    payload = {
        "problem": problem.name,
        "steps": steps,
        "equations": [render(e) for e in ode.equations],
        "removed_factors": [f.render() for f in ode.removed_factors],
        "profiles": ode.profiles,
        "speed": ode.speed,
        "wave_sign": ode.wave_sign,
    }
    if args.json:
        _emit(payload, True)
    else:
        print(f"problem {problem.name}: {' -> '.join(steps)}")
        for eq, factor in zip(ode.equations, ode.removed_factors):
            note = f"   [i-factor removed: {factor.render()}]" if factor.render() != "1" else ""
            print(f"  {render(eq)} = 0{note}")
    return 0


def cmd_derive(args) -> int:
    problem = parse_problem(args.problem)
    derived = derive_system(
        problem,
        transform=args.transform,
        order_override=args.order,
    )
    system = derived.system
    payload = {
        "problem": problem.name,
        "steps": derived.steps,
        "balance_order": render(derived.balance.to_expr()),
        "order": derived.order,
        "equation": render(derived.ode.equations[0]),
        "clearing_power": derived.laurent.clearing_power,
        "unknowns": system.unknowns,
        "parameters": system.parameters,
        "equations": [
            {"phi_power": eq.source_power, "poly": eq.poly.render()}
            for eq in system.equations
        ],
        "dropped_powers": system.dropped_powers,
    }
    if args.json:
        _emit(payload, True)
    else:
        print(f"problem {problem.name}: {' -> '.join(derived.steps)}")
        print(f"  ODE: {render(derived.ode.equations[0])} = 0")
        print(f"  balance order M = {render(derived.balance.to_expr())} -> {derived.order}")
        print(f"  unknowns: {', '.join(system.unknowns)}")
        if system.parameters:
            print(f"  parameters: {', '.join(system.parameters)}")
        for line in system.render_lines():
            print(f"  {line}")
    return 0


def cmd_verify(args) -> int:
    case = load_candidate(args.candidate)
    problem_file = args.problem
    problem = parse_problem(problem_file)
    derived = derive_system(
        problem, pipeline=case.pipeline or None, transform=case.transform
    )
    report = verify_candidate(derived.system, case.candidate)

    payload = {
        "case": case.candidate.source,
        "passed": report.passed,
        "equations": [
            {
                "phi_power": s.source_power,
                "zero": s.is_zero,
                "residual": s.residual,
            }
            for s in report.statuses
        ],
        "residual_report": None,
    }
    residual_report = None
    if report.passed:
        solution = assemble_solution(
            case.candidate, derived.ansatz, "tan", derived.ode
        )
        inst = dict(case.instantiations[0]) if case.instantiations else {}
        inst.update(_parse_assignments(args.params))
        if inst:
            speed = derived.ode.speed
            if speed not in inst and speed in case.candidate.bindings:
                inst[speed] = eval_complex(case.candidate.binding_expr(speed), inst)
            residual_report = ode_residual(
                derived.ode,
                {derived.ode.profiles[0]: solution.expansion_z},
                default_z_samples(seed=args.seed),
                inst,
            )
            payload["residual_report"] = residual_report.to_json_dict()
    if args.json:
        _emit(payload, True)
    else:
        print(f"case {case.candidate.source}")
        for line in report.render_lines():
            print(f"  {line}")
        if residual_report is not None:
            print(f"  ODE residual max: {residual_report.max_residual:.3e} "
                  f"(skipped {residual_report.skipped} near-pole samples)")
    return 0


def cmd_solve(args) -> int:
    problem = parse_problem(args.problem)
    derived = derive_system(
        problem, transform=args.transform, auto_transform=True
    )
    params = _parse_assignments(args.params)
    pinned = _parse_assignments(args.pin)
    config = SolveConfig(
        starts=args.starts, tol=args.tol, seed=args.seed, radius=args.radius
    )
    candidates = solve_numeric(derived.system, params, pinned=pinned, config=config)
    payload = {
        "problem": problem.name,
        "unknowns": derived.system.unknowns,
        "count": len(candidates),
        "status": "ok" if candidates else "no roots found",
        "candidates": [candidate_to_json(c) for c in candidates],
    }
    if args.json:
        _emit(payload, True)
    else:
        if not candidates:
            print("no roots found")
        for cand in candidates:
            parts = []
            for name in sorted(cand.bindings):
                v = complex(cand.bindings[name])
                parts.append(f"{name} = {v.real:.6g}{v.imag:+.6g}i")
            print("  " + ", ".join(parts))
    return 0


def cmd_compat(args) -> int:
    results = run_compat(
        fixtures=args.fixtures, case_filter=args.case, seed=args.seed
    )
    if args.json:
        _emit({"cases": [r.to_json_dict() for r in results]}, True)
    else:
        print(render_markdown(results))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meda",
        description=(
            "Exact traveling-wave solutions of nonlinear PDEs by auxiliary-"
            "equation expansion, with symbolic verification and numeric "
            "residual checks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="wave-transform a problem file to an ODE")
    p.add_argument("problem")
    p.add_argument("--integrate", action="store_true", help="integrate once (constants 0)")
    p.add_argument("--constants", help="integration constants, comma separated")
    p.add_argument("--eliminate", metavar="UNKNOWN", help="eliminate an unknown")
    _common_flags(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("derive", help="derive the vanishing-coefficient system")
    p.add_argument("problem")
    p.add_argument("--transform", help="power transform exponent, e.g. \"-1/(n-1)\"")
    p.add_argument("--order", "--M", dest="order", type=int, help="override expansion order")
    _common_flags(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("verify", help="verify a candidate file against a problem")
    p.add_argument("problem")
    p.add_argument("candidate")
    p.add_argument("--params", help="numeric instantiation NAME=VALUE,...")
    _common_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="numeric root families at instantiated parameters")
    p.add_argument("problem")
    p.add_argument("--params", help="parameter values NAME=VALUE,...")
    p.add_argument("--pin", help="pin unknowns NAME=VALUE,...")
    p.add_argument("--starts", type=int, default=200)
    p.add_argument("--radius", type=float, default=5.0)
    p.add_argument("--transform", help="power transform exponent override")
    _common_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compat", help="compatibility report over shipped case fixtures")
    p.add_argument("--case", help="run a single case by source tag")
    p.add_argument("--fixtures", help="fixture directory (overrides MEDA_FIXTURES)")
    _common_flags(p)
    p.set_defaults(func=cmd_compat)

    return parser


def _join_value_flags(argv):
    """Fold `--transform -1/(n-1)` into `--transform=-1/(n-1)` so values
    starting with a dash survive argparse."""
    out = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in ("--transform", "--constants", "--params", "--pin") and i + 1 < len(argv):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
        else:
            out.append(arg)
            i += 1
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(_join_value_flags(list(argv)))
    try:
        return args.func(args)
    except NonIntegerBalanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MedaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        try:
            sys.stdout.close()
        except Exception:
            pass
        return 0


if __name__ == "__main__":
    sys.exit(main())
