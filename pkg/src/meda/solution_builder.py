"""Closed-form traveling-wave solutions from verified candidates.

The auxiliary equation phi' = b + phi^2 has tanh/coth solutions for b < 0,
tan/cot solutions for b > 0, and -1/z at b = 0; radicals stay symbolic and
all five shapes extend to symbolic or complex b by analytic continuation.
Assembling a solution substitutes the chosen phi into the expansion, undoes
a power transform (profile = V^p), reinstates eliminated profiles, and maps
z back to i(x + s*speed*t).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SolutionError
from .expr_core import (
    Const,
    Expr,
    GaussianRational,
    const,
    eval_complex,
    fn,
    free_symbols,
    mul,
    parse_expr,
    poly_zero_check,
    pow_,
    render,
    substitute,
    sym,
)
from .meda_engine import Ansatz
from .pde_frontend import TravelingWaveODE, WAVE_VARIABLE
from .algsolve import Candidate

BRANCHES = ("tanh", "coth", "tan", "cot", "rational")


def build_phi(b_value, branch: str) -> Expr:
    """phi(z) for the given auxiliary parameter value and branch tag."""
    if branch not in BRANCHES:
        raise SolutionError(f"unknown branch {branch!r}; expected one of {BRANCHES}")
    if not isinstance(b_value, Expr):
        b_value = Const(GaussianRational.from_value(b_value))
    z = sym(WAVE_VARIABLE)
    if branch == "rational":
        if not poly_zero_check(b_value):
            raise SolutionError("rational branch requires b = 0")
        return mul(const(-1), pow_(z, const(-1)))
    if branch in ("tanh", "coth"):
        root = fn("sqrt", mul(const(-1), b_value))
        return mul(const(-1), root, fn(branch, mul(root, z)))
    root = fn("sqrt", b_value)
    if branch == "tan":
        return mul(root, fn("tan", mul(root, z)))
    return mul(const(-1), root, fn("cot", mul(root, z)))


@dataclass
class ClosedFormSolution:
    expressions: dict          # unknown name -> Expr in x, t
    branch: str
    wave_speed: Expr
    power_exponent: Expr | None
    candidate: Candidate
    profile_z: Expr | None = None    # primary unknown's profile in z
    expansion_z: Expr | None = None  # raw expansion profile in z (pre-inversion)

    def render_lines(self) -> list[str]:
        return [f"{name}(x,t) = {render(e)}" for name, e in self.expressions.items()]


def assemble_solution(
    cand: Candidate, ansatz: Ansatz, branch: str, ode: TravelingWaveODE
) -> ClosedFormSolution:
    """Substitute phi(z) into the expansion and return u(x,t) (and the other
    unknowns of a system via their recorded elimination relations)."""
    if not cand.verified:
        raise SolutionError("candidate has not passed verification; refusing to build")
    if ansatz.aux not in cand.bindings and ansatz.aux not in cand.arbitrary:
        raise SolutionError("candidate does not bind the auxiliary parameter")

    bindings = {
        name: cand.binding_expr(name)
        for name in cand.bindings
    }
    b_value = bindings.get(ansatz.aux, sym(ansatz.aux))
    phi_expr = build_phi(b_value, branch)

    if isinstance(phi_expr, Const) and phi_expr.value.is_zero:
        if any(
            name.startswith("b") and name != ansatz.aux and not _binding_is_zero(cand, name)
            for name in cand.bindings
        ):
            raise SolutionError("phi vanishes on this branch but negative powers remain")

    expansion_z = substitute(ansatz.expansion, {**bindings, ansatz.phi: phi_expr})
    profile_z = expansion_z

    transform = ode.transform
    power_exponent = None
    if transform is not None:
        power_exponent = transform.exponent
        profile_z = pow_(profile_z, power_exponent)

    problem = ode.problem
    if problem is None:
        raise SolutionError("ODE carries no source problem")
    speed_expr = bindings.get(ode.speed, sym(ode.speed))
    s = const(ode.wave_sign)
    z_sub = mul(
        Const(GaussianRational(0, 1)),
        sym("x") + mul(s, speed_expr, sym("t")),
    )

    profile_map = ode.profile_map()
    primary_unknown = problem.unknowns[0]
    expressions = {primary_unknown: substitute(profile_z, {WAVE_VARIABLE: z_sub})}

    # reinstate eliminated profiles through their recorded relations
    inverse_map = {v: k for k, v in profile_map.items()}
    for prof, relation in ode.eliminations:
        rel = substitute(relation, bindings)
        primary_profile = (
            transform.old_profile if transform is not None else ode.profiles[0]
        )
        rel = substitute(rel, {primary_profile: profile_z})
        unknown = inverse_map.get(prof, prof.lower())
        expressions[unknown] = substitute(rel, {WAVE_VARIABLE: z_sub})

    allowed = set(problem.parameters) | set(cand.arbitrary) | {"x", "t", ode.speed}
    for name, e in expressions.items():
        leaked = free_symbols(e) - allowed
        if leaked:
            raise SolutionError(
                f"solution for {name} leaks internal symbols {sorted(leaked)}"
            )

    return ClosedFormSolution(
        expressions=expressions,
        branch=branch,
        wave_speed=speed_expr,
        power_exponent=power_exponent,
        candidate=cand,
        profile_z=profile_z,
        expansion_z=expansion_z,
    )


def _binding_is_zero(cand: Candidate, name: str) -> bool:
    value = cand.bindings[name]
    if isinstance(value, Expr):
        return poly_zero_check(value)
    return complex(value) == 0
