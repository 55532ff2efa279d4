"""Auxiliary-function expansion: ansatz construction, derivative rewriting
through phi' = b + phi^2, and extraction of the vanishing-coefficient system.

The wave profile is expanded as a0 + sum_j (a_j phi^j + b_j phi^-j); every z
derivative raises the phi degree by one through the Riccati rule, so a
polynomial ODE becomes a finite Laurent polynomial in phi whose coefficients
must all vanish.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import AnsatzError, NonPolynomialError
from .expr_core import (
    Deriv,
    Expr,
    Poly,
    PolyForm,
    Sym,
    add,
    const,
    differentiate,
    expand_derivatives,
    expand_normalize,
    free_symbols,
    mul,
    pow_,
    render,
    replace_nodes,
    sym,
)
from .pde_frontend import TravelingWaveODE, WAVE_VARIABLE, expand_to_terms

log = logging.getLogger(__name__)

PHI = "phi"
AUX = "b"


@dataclass
class Ansatz:
    M: int
    phi: str = PHI
    aux: str = AUX

    @property
    def a_symbols(self) -> list[str]:
        return [f"a{j}" for j in range(0, self.M + 1)]

    @property
    def b_symbols(self) -> list[str]:
        return [f"b{j}" for j in range(1, self.M + 1)]

    @property
    def coefficient_symbols(self) -> list[str]:
        return self.a_symbols + self.b_symbols

    @property
    def unknown_symbols(self) -> list[str]:
        return self.coefficient_symbols + [self.aux]

    @property
    def expansion(self) -> Expr:
        phi = sym(self.phi)
        terms = [sym("a0")]
        for j in range(1, self.M + 1):
            terms.append(mul(sym(f"a{j}"), pow_(phi, const(j))))
            terms.append(mul(sym(f"b{j}"), pow_(phi, const(-j))))
        return add(*terms)


def build_ansatz(M: int) -> Ansatz:
    if not isinstance(M, int) or M < 1:
        raise AnsatzError(f"expansion order must be a positive integer, got {M!r}")
    return Ansatz(M)


def riccati_derivative(e: Expr, ansatz: Ansatz) -> Expr:
    """d/dz with phi' rewritten to b + phi^2."""
    phi = sym(ansatz.phi)
    d = differentiate(e, WAVE_VARIABLE, dependent=frozenset([ansatz.phi]))
    rule = add(sym(ansatz.aux), pow_(phi, const(2)))
    return replace_nodes(d, {Deriv(Sym(ansatz.phi), ((WAVE_VARIABLE, 1),)): rule})


@dataclass
class LaurentExpansion:
    """Cleared Laurent polynomial in phi with provenance metadata."""

    polyform: PolyForm
    clearing_power: int
    source_min_power: int
    ansatz: Ansatz

    def source_power(self, cleared_exponent: int) -> int:
        return cleared_exponent - self.clearing_power


def substitute_ansatz(ode: TravelingWaveODE, ansatz: Ansatz) -> LaurentExpansion:
    """Insert the expansion into a single-profile polynomial ODE and collect
    a Laurent polynomial in phi; negative powers are cleared by the minimal
    multiplier phi^k, which is recorded."""
    if len(ode.equations) != 1 or len(ode.profiles) != 1:
        raise AnsatzError("ansatz substitution needs a single-profile ODE")
    profile = ode.profiles[0]
    equation = expand_derivatives(ode.equations[0], dependent=frozenset([profile]))

    clash = (set(ansatz.unknown_symbols) | {ansatz.phi}) & free_symbols(equation)
    if clash:
        raise AnsatzError(f"ansatz symbols {sorted(clash)} collide with the equation")

    max_order = 0
    for term in expand_to_terms(equation):
        for atom in term.atom_powers:
            if isinstance(atom, Deriv):
                if not (
                    isinstance(atom.inner, Sym)
                    and atom.inner.name == profile
                    and set(v for v, _ in atom.orders) == {WAVE_VARIABLE}
                ):
                    raise AnsatzError(
                        f"unexpected derivative marker {render(atom)}"
                    )
                max_order = max(max_order, atom.total_order)
            elif isinstance(atom, Sym):
                continue
            else:
                if profile in free_symbols(atom):
                    raise NonPolynomialError(
                        f"ODE is not polynomial in {profile}: {render(atom)}"
                    )

    levels = [ansatz.expansion]
    for _ in range(max_order):
        levels.append(riccati_derivative(levels[-1], ansatz))

    mapping = {Sym(profile): levels[0]}
    for k in range(1, max_order + 1):
        mapping[Deriv(Sym(profile), ((WAVE_VARIABLE, k),))] = levels[k]
    substituted = replace_nodes(equation, mapping)

    form = expand_normalize(substituted, [ansatz.phi])
    min_power = form.min_exponents()[0]
    clearing = max(0, -min_power)
    if clearing:
        form = form.shift((clearing,))
    return LaurentExpansion(
        polyform=form,
        clearing_power=clearing,
        source_min_power=min_power,
        ansatz=ansatz,
    )


@dataclass
class SystemEquation:
    poly: Poly
    source_power: int

    def to_expr(self, atom_exprs=None) -> Expr:
        return self.poly.to_expr(atom_exprs)


@dataclass
class AlgebraicSystem:
    unknowns: list[str]
    parameters: list[str]
    equations: list[SystemEquation]
    ansatz: Ansatz
    dropped_powers: list[int] = field(default_factory=list)

    def render_lines(self) -> list[str]:
        lines = []
        for eq in self.equations:
            lines.append(f"phi^{eq.source_power}: {eq.poly.render()} = 0")
        return lines


def extract_system(
    laurent: LaurentExpansion, ansatz: Ansatz, speed: str
) -> AlgebraicSystem:
    """One equation per occurring phi power; unknowns are the expansion
    coefficients, the auxiliary parameter, and the wave speed when present."""
    present: set = set()
    equations = []
    dropped = []
    for mono, coeff in laurent.polyform:
        power = laurent.source_power(mono[0])
        if coeff.is_zero:
            dropped.append(power)
            continue
        present |= set(coeff.used_symbols())
        equations.append(SystemEquation(poly=coeff.compact(), source_power=power))
    if dropped:
        log.debug("dropped identically-zero phi powers: %s", dropped)

    unknowns = [u for u in ansatz.unknown_symbols]
    if speed in present and speed not in unknowns:
        unknowns.append(speed)
    parameters = sorted(present - set(unknowns))
    return AlgebraicSystem(
        unknowns=unknowns,
        parameters=parameters,
        equations=equations,
        ansatz=ansatz,
        dropped_powers=dropped,
    )
