"""Shared pipeline driver: problem file -> algebraic system.

Reduction is always first.  Multi-profile systems are integrated once (zero
constants) and every secondary unknown is eliminated into the equation
carrying the highest derivative.  If balancing fails because integration has
not happened yet (pure derivative equation), one structural integration is
retried.  A non-integer balance order requires a power transform: callers
either pass one explicitly or opt in to the automatic choice p = M/2, which
maps the +/-2/(n-1) family onto integer order 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .balance import BalanceResult, compute_balance, power_transform
from .errors import BalanceError, MedaError
from .expr_core import Deriv, Expr, const, mul, parse_expr, pow_, render
from .meda_engine import (
    AlgebraicSystem,
    Ansatz,
    LaurentExpansion,
    build_ansatz,
    extract_system,
    substitute_ansatz,
)
from .pde_frontend import (
    PDEProblem,
    TravelingWaveODE,
    eliminate,
    expand_to_terms,
    integrate_once,
    reduce_to_ode,
)


class NonIntegerBalanceError(MedaError):
    def __init__(self, balance: BalanceResult, message: str):
        self.balance = balance
        super().__init__(message)


@dataclass
class DerivedSystem:
    problem: PDEProblem
    ode: TravelingWaveODE
    balance: BalanceResult
    order: int
    ansatz: Ansatz
    laurent: LaurentExpansion
    system: AlgebraicSystem
    steps: list


def _equation_marker_order(eq: Expr) -> int:
    top = 0
    for term in expand_to_terms(eq):
        for atom in term.atom_powers:
            if isinstance(atom, Deriv):
                top = max(top, atom.total_order)
    return top


def reduce_problem(
    problem: PDEProblem,
    integrate: bool = False,
    constants=None,
    eliminate_unknown: str | None = None,
) -> tuple[TravelingWaveODE, list]:
    """reduce -> (optional) integrate -> (optional) eliminate, tracking steps."""
    steps = ["reduce"]
    ode = reduce_to_ode(problem)
    if integrate:
        ode = integrate_once(ode, constants)
        steps.append("integrate")
    if eliminate_unknown:
        into = max(
            range(len(ode.equations)),
            key=lambda idx: _equation_marker_order(ode.equations[idx]),
        )
        ode = eliminate(ode, eliminate_unknown, into=into)
        steps.append(f"eliminate {eliminate_unknown}")
    return ode, steps


def prepare_single_profile(problem: PDEProblem, pipeline=None) -> tuple[TravelingWaveODE, list]:
    """Run the standard structural steps down to one profile equation.

    With pipeline hints (("integrate",) or ("integrate", "eliminate v")), do
    exactly those; otherwise integrate/eliminate automatically as needed.
    """
    ode = reduce_to_ode(problem)
    steps = ["reduce"]
    if pipeline is not None:
        for step in pipeline:
            if step == "integrate":
                ode = integrate_once(ode)
                steps.append("integrate")
            elif step.startswith("eliminate"):
                target = step.split()[1]
                into = max(
                    range(len(ode.equations)),
                    key=lambda idx: _equation_marker_order(ode.equations[idx]),
                )
                ode = eliminate(ode, target, into=into)
                steps.append(step)
            else:
                raise MedaError(f"unknown pipeline step {step!r}")
        return ode, steps

    if len(ode.profiles) > 1:
        ode = integrate_once(ode)
        steps.append("integrate")
        for unknown in problem.unknowns[1:]:
            into = max(
                range(len(ode.equations)),
                key=lambda idx: _equation_marker_order(ode.equations[idx]),
            )
            ode = eliminate(ode, unknown, into=into)
            steps.append(f"eliminate {unknown}")
    return ode, steps


def balance_with_retry(ode: TravelingWaveODE, steps: list) -> tuple[TravelingWaveODE, BalanceResult]:
    """Balance; if no pure power term exists yet, integrate once and retry."""
    try:
        return ode, compute_balance(ode)
    except BalanceError as exc:
        if "pure power" not in str(exc):
            raise
        ode = integrate_once(ode)
        steps.append("integrate")
        return ode, compute_balance(ode)


def auto_transform_exponent(balance: BalanceResult) -> Expr:
    """p = M/2: the transformed profile then balances at order 2."""
    half_num = balance.numerator * Fraction(1, 2)
    return mul(half_num.to_expr(), pow_(balance.denominator.to_expr(), const(-1)))


def derive_system(
    problem: PDEProblem,
    pipeline=None,
    transform: str | Expr | None = None,
    order_override: int | None = None,
    auto_transform: bool = False,
) -> DerivedSystem:
    """Full derivation: structural steps, balance, optional power transform,
    ansatz substitution, and coefficient extraction."""
    ode, steps = prepare_single_profile(problem, pipeline)
    ode, balance = balance_with_retry(ode, steps)

    transform_expr = None
    if transform is not None:
        transform_expr = (
            transform
            if isinstance(transform, Expr)
            else parse_expr(transform, set(problem.parameters))
        )
    order = balance.as_integer()
    if transform_expr is None and order is None and auto_transform:
        transform_expr = auto_transform_exponent(balance)
    if transform_expr is not None:
        ode = power_transform(ode, transform_expr)
        steps.append(f"transform {render(transform_expr)}")
        balance = compute_balance(ode)
        order = balance.as_integer()

    if order_override is not None:
        order = order_override
    if order is None:
        raise NonIntegerBalanceError(
            balance,
            f"balance order M = {render(balance.to_expr())} is not an integer; "
            "a power transform (e.g. --transform \"-1/(n-1)\") is required",
        )
    if order < 1:
        raise BalanceError(f"balance order M = {order} is not positive")

    ansatz = build_ansatz(order)
    laurent = substitute_ansatz(ode, ansatz)
    system = extract_system(laurent, ansatz, ode.speed)
    return DerivedSystem(
        problem=problem,
        ode=ode,
        balance=balance,
        order=order,
        ansatz=ansatz,
        laurent=laurent,
        system=system,
        steps=steps,
    )
