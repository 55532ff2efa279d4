"""Problem files, the complex traveling-wave transform, and structural
once-integration.

A problem file declares variables x, t, one or more unknowns, parameters and
equations; ``reduce_to_ode`` substitutes u(x,t) = U(z) with z = i(x + s*v*t),
turning every x/t derivative marker into a z marker and dividing out the
common power of i.  ``integrate_once`` and ``eliminate`` perform the
structural manipulations that take a reduced system down to a single
polynomial equation in one profile function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import (
    EliminationError,
    IntegrationError,
    ProblemFileError,
    ReductionError,
)
from .expr_core import (
    AtomTable,
    Const,
    Deriv,
    Expr,
    GaussianRational,
    Poly,
    Pow,
    Sym,
    add,
    const,
    contains_deriv,
    deriv,
    expr_to_ratfun,
    free_symbols,
    is_zero_expr,
    mul,
    parse_expr,
    pow_,
    poly_zero_check,
    render,
    substitute,
    sym,
)

WAVE_VARIABLE = "z"


@dataclass
class PDEProblem:
    name: str
    variables: tuple[str, str]
    unknowns: list[str]
    parameters: list[str]
    constraints: list[tuple[str, str, Fraction]]
    equations: list[Expr]
    wave_sign: int
    speed: str
    path: str | None = None

    @property
    def declared_symbols(self) -> set[str]:
        return set(self.variables) | set(self.unknowns) | set(self.parameters)

    def profile_name(self, unknown: str) -> str:
        return unknown.upper()


@dataclass
class PowerTransformRecord:
    exponent: Expr
    old_profile: str
    new_profile: str
    clearing_exponent: Expr
    coefficient_multiplier: Expr


@dataclass
class TravelingWaveODE:
    problem: PDEProblem | None
    profiles: list[str]
    equations: list[Expr]
    removed_factors: list[GaussianRational]
    speed: str
    wave_sign: int
    integration_constants: list[Expr] | None = None
    eliminations: list[tuple[str, Expr]] = field(default_factory=list)
    transform: PowerTransformRecord | None = None

    @property
    def parameters(self) -> list[str]:
        return list(self.problem.parameters) if self.problem else []

    def profile_map(self) -> dict[str, str]:
        """unknown name -> profile name (post-elimination profiles only)."""
        if self.problem is None:
            return {}
        return {
            u: self.problem.profile_name(u)
            for u in self.problem.unknowns
        }


# ---------------------------------------------------------------------------
# problem DSL


def parse_problem(path) -> PDEProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(str(exc), path=path)
    name = None
    variables = None
    unknowns: list[str] = []
    parameters: list[str] = []
    constraints: list[tuple[str, str, Fraction]] = []
    raw_equations: list[tuple[int, str]] = []
    wave = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        def fail(msg):
            raise ProblemFileError(msg, path=path, line=lineno)

        if line.startswith("problem "):
            name = line[len("problem ") :].strip()
        elif line.startswith("vars "):
            parts = line.split()[1:]
            if parts != ["x", "t"]:
                fail("expected `vars x t`")
            variables = ("x", "t")
        elif line.startswith("unknowns "):
            unknowns = line.split()[1:]
            if not unknowns:
                fail("at least one unknown required")
        elif line.startswith("params"):
            parameters = line.split()[1:]
        elif line.startswith("constraint "):
            parts = line.split()
            if len(parts) != 4 or parts[2] not in (">", "<", ">=", "<=", "!="):
                fail("expected `constraint <sym> <op> <value>`")
            try:
                bound = Fraction(parts[3])
            except ValueError:
                fail(f"bad constraint bound {parts[3]!r}")
            constraints.append((parts[1], parts[2], bound))
        elif line.startswith("eq:"):
            raw_equations.append((lineno, line[3:].strip()))
        elif line.startswith("wave:"):
            wave = (lineno, line[5:].strip())
        else:
            fail(f"unrecognized line {line!r}")

    if name is None:
        raise ProblemFileError("missing `problem <name>` line", path=path)
    if variables is None:
        raise ProblemFileError("missing `vars x t` line", path=path)
    if not unknowns:
        raise ProblemFileError("missing `unknowns` line", path=path)
    if not raw_equations:
        raise ProblemFileError("no `eq:` lines", path=path)
    if wave is None:
        raise ProblemFileError("missing `wave:` line", path=path)

    wave_lineno, wave_text = wave
    wave_sign, speed = _parse_wave(wave_text, path, wave_lineno)

    declared = set(variables) | set(unknowns) | set(parameters)
    seen = list(variables) + unknowns + parameters
    if len(set(seen)) != len(seen):
        raise ProblemFileError("duplicate symbol declaration", path=path)

    equations = []
    for lineno, eq_text in raw_equations:
        if not eq_text.endswith("= 0"):
            raise ProblemFileError("equation must end with `= 0`", path, lineno)
        body = eq_text[: -len("= 0")].strip()
        try:
            expr = parse_expr(body, declared)
        except Exception as exc:
            raise ProblemFileError(f"bad equation: {exc}", path, lineno)
        if not contains_deriv(expr):
            raise ProblemFileError(
                "equation contains no derivative D(...)", path, lineno
            )
        bad = free_symbols(expr) - declared
        if bad:
            raise ProblemFileError(f"undeclared symbols {sorted(bad)}", path, lineno)
        equations.append(expr)

    return PDEProblem(
        name=name,
        variables=variables,
        unknowns=unknowns,
        parameters=parameters,
        constraints=constraints,
        equations=equations,
        wave_sign=wave_sign,
        speed=speed,
        path=str(path),
    )


def _parse_wave(text: str, path, lineno) -> tuple[int, str]:
    import re

    m = re.fullmatch(
        r"z\s*=\s*i\*\(\s*x\s*([+-])\s*([A-Za-z][A-Za-z0-9_]*)\s*\*\s*t\s*\)", text
    )
    if not m:
        raise ProblemFileError(
            "expected `wave: z = i*(x <+|-> <speed>*t)`", path, lineno
        )
    return (1 if m.group(1) == "+" else -1), m.group(2)


# ---------------------------------------------------------------------------
# term lists: expanded monomials over parameters, profiles and opaque atoms


@dataclass
class Term:
    coeff: GaussianRational
    sym_powers: dict      # plain symbol name -> integer exponent
    atom_powers: dict     # atom Expr (Deriv / symbolic Pow / Fn) -> exponent
    divisor: Expr | None  # parameter-only denominator, if any

    def to_expr(self) -> Expr:
        factors = [Const(self.coeff)]
        for name, e in sorted(self.sym_powers.items()):
            factors.append(pow_(sym(name), const(e)))
        for atom, e in self.atom_powers.items():
            factors.append(pow_(atom, const(e)))
        if self.divisor is not None:
            factors.append(pow_(self.divisor, const(-1)))
        return mul(*factors)


def expand_to_terms(e: Expr) -> list[Term]:
    """Fully expand into monomial terms over symbols and opaque atoms.

    All symbols are Laurent-capable (integer powers of either sign live in
    the numerator); only composite-base negative powers become a divisor.
    """
    num, den, table = expr_to_ratfun(e, main=free_symbols(e), strict=False)
    divisor = None
    if den.is_constant:
        scale = GaussianRational(1) / den.constant_value()
        num = num * scale
    else:
        divisor = den.to_expr(table.exprs)
    terms = []
    for mono, coeff in sorted(num.terms.items()):
        sym_powers = {}
        atom_powers = {}
        for s, exp in zip(num.symbols, mono):
            if not exp:
                continue
            if table.is_atom(s):
                atom_powers[table.exprs[s]] = exp
            else:
                sym_powers[s] = exp
        terms.append(Term(coeff, sym_powers, atom_powers, divisor))
    return terms


def terms_to_expr(terms) -> Expr:
    return add(*(t.to_expr() for t in terms)) if terms else const(0)


def _leading_sign_negative(term: Term, param_order) -> bool:
    return term.coeff.is_negative()


def sign_normalize(e: Expr) -> tuple[Expr, bool]:
    """Expand; multiply by -1 when every term is negatively signed."""
    terms = expand_to_terms(e)
    flipped = bool(terms) and all(t.coeff.is_negative() for t in terms)
    if flipped:
        terms = [
            Term(-t.coeff, t.sym_powers, t.atom_powers, t.divisor) for t in terms
        ]
    return terms_to_expr(terms), flipped


def _marker_order(term: Term) -> int:
    total = 0
    for atom, e in term.atom_powers.items():
        if isinstance(atom, Deriv):
            total += atom.total_order * e
    return total


def orient_by_top_derivative(e: Expr) -> tuple[Expr, bool]:
    """Expand; flip the sign so the highest-order derivative terms (or,
    failing that, all terms) carry positive coefficients."""
    terms = expand_to_terms(e)
    if not terms:
        return terms_to_expr(terms), False
    k_max = max(_marker_order(t) for t in terms)
    if k_max > 0:
        top = [t for t in terms if _marker_order(t) == k_max]
        flip = all(t.coeff.is_negative() for t in top)
    else:
        flip = all(t.coeff.is_negative() for t in terms)
    if flip:
        terms = [
            Term(-t.coeff, t.sym_powers, t.atom_powers, t.divisor) for t in terms
        ]
    return terms_to_expr(terms), flip


# ---------------------------------------------------------------------------
# wave reduction


def reduce_to_ode(problem: PDEProblem) -> TravelingWaveODE:
    """Apply u(x,t) = U(z), z = i(x + s*speed*t); clear the common i power."""
    profiles = {u: problem.profile_name(u) for u in problem.unknowns}
    clash = set(profiles.values()) & problem.declared_symbols
    if clash:
        raise ReductionError(f"profile symbols {sorted(clash)} collide with declared symbols")
    s = problem.wave_sign
    speed = sym(problem.speed)
    x_var, t_var = problem.variables

    from .expr_core import Add, Fn, Mul, fn

    def transform(node: Expr) -> Expr:
        if isinstance(node, Sym):
            if node.name in profiles:
                return sym(profiles[node.name])
            if node.name in (x_var, t_var):
                raise ReductionError(
                    f"explicit {node.name!r} remains; equation is not reducible"
                )
            return node
        if isinstance(node, Const):
            return node
        if isinstance(node, Deriv):
            inner = transform(node.inner)
            kx = node.order_of(x_var)
            kt = node.order_of(t_var)
            other = [(v, k) for v, k in node.orders if v not in (x_var, t_var)]
            if other:
                raise ReductionError(
                    f"unexpected differentiation variables in {render(node)}"
                )
            total = kx + kt
            # d/dx -> i d/dz ; d/dt -> s*speed*i d/dz
            factor = mul(
                pow_(Const(GaussianRational(0, 1)), const(total)),
                pow_(mul(const(s), speed), const(kt)),
            )
            return mul(factor, deriv(inner, ((WAVE_VARIABLE, total),)))
        if isinstance(node, Add):
            return add(*(transform(a) for a in node.args))
        if isinstance(node, Mul):
            return mul(*(transform(a) for a in node.args))
        if isinstance(node, Pow):
            return pow_(transform(node.base), transform(node.exponent))
        if isinstance(node, Fn):
            return fn(node.name, transform(node.arg))
        raise TypeError(type(node))

    equations = []
    factors = []
    for eq in problem.equations:
        reduced = transform(eq)
        reduced, factor = _clear_common_factor(reduced)
        equations.append(reduced)
        factors.append(factor)
    return TravelingWaveODE(
        problem=problem,
        profiles=[profiles[u] for u in problem.unknowns],
        equations=equations,
        removed_factors=factors,
        speed=problem.speed,
        wave_sign=s,
    )


def _clear_common_factor(e: Expr) -> tuple[Expr, GaussianRational]:
    """Divide out a global factor of i and/or -1; return (equation, factor)."""
    terms = expand_to_terms(e)
    if not terms:
        return e, GaussianRational(1)
    factor = GaussianRational(1)
    if all(t.coeff.is_imaginary for t in terms):
        inv_i = GaussianRational(0, -1)
        terms = [
            Term(t.coeff * inv_i, t.sym_powers, t.atom_powers, t.divisor)
            for t in terms
        ]
        factor = GaussianRational(0, 1)
    if all(t.coeff.is_negative() for t in terms):
        terms = [
            Term(-t.coeff, t.sym_powers, t.atom_powers, t.divisor) for t in terms
        ]
        factor = factor * GaussianRational(-1)
    return terms_to_expr(terms), factor


# ---------------------------------------------------------------------------
# structural once-integration


def _is_z_free(e: Expr, profiles) -> bool:
    names = free_symbols(e)
    return WAVE_VARIABLE not in names and not (names & set(profiles))


def integrate_once(ode: TravelingWaveODE, constants=None) -> TravelingWaveODE:
    """Antidifferentiate each equation once with respect to z.

    Every additive term must match one of the recognized patterns:
    a marker D(w, z, k) with k >= 1, or coeff * P^k * P' for a profile P.
    The integration constant moves to the left-hand side (eq - C = 0).
    """
    n_eq = len(ode.equations)
    if constants is None:
        consts = [const(0)] * n_eq
    elif isinstance(constants, (list, tuple)):
        if len(constants) != n_eq:
            raise IntegrationError(
                f"expected {n_eq} integration constants, got {len(constants)}"
            )
        consts = [c if isinstance(c, Expr) else const(c) for c in constants]
    else:
        consts = [constants if isinstance(constants, Expr) else const(constants)] * n_eq

    profiles = set(ode.profiles)
    new_equations = []
    for eq, c_int in zip(ode.equations, consts):
        new_terms = []
        for term in expand_to_terms(eq):
            new_terms.append(_integrate_term(term, profiles))
        integrated = add(*new_terms) - c_int
        integrated, _ = sign_normalize(integrated)
        new_equations.append(integrated)
    return TravelingWaveODE(
        problem=ode.problem,
        profiles=list(ode.profiles),
        equations=new_equations,
        removed_factors=list(ode.removed_factors),
        speed=ode.speed,
        wave_sign=ode.wave_sign,
        integration_constants=consts,
        eliminations=list(ode.eliminations),
        transform=ode.transform,
    )


def _integrate_term(term: Term, profiles) -> Expr:
    markers = []
    symbolic_powers = []
    for atom, e in term.atom_powers.items():
        if isinstance(atom, Deriv):
            markers.append((atom, e))
        elif (
            isinstance(atom, Pow)
            and isinstance(atom.base, Sym)
            and atom.base.name in profiles
        ):
            symbolic_powers.append((atom, e))
        else:
            raise IntegrationError(f"term not integrable: {render(term.to_expr())}")
    profile_syms = {s: e for s, e in term.sym_powers.items() if s in profiles}

    coeff_factors = [Const(term.coeff)]
    for s, e in sorted(term.sym_powers.items()):
        if s not in profiles:
            coeff_factors.append(pow_(sym(s), const(e)))
    if term.divisor is not None:
        coeff_factors.append(pow_(term.divisor, const(-1)))
    coeff = mul(*coeff_factors)
    if not _is_z_free(coeff, profiles):
        raise IntegrationError(
            f"non-constant coefficient blocks integration: {render(term.to_expr())}"
        )

    # pattern (a): a single whole marker, no profile factors alongside
    if markers and not profile_syms and not symbolic_powers:
        if len(markers) != 1 or markers[0][1] != 1:
            raise IntegrationError(
                f"term not integrable: {render(term.to_expr())}"
            )
        marker = markers[0][0]
        orders = dict(marker.orders)
        k = orders.get(WAVE_VARIABLE, 0)
        if k < 1 or set(orders) != {WAVE_VARIABLE}:
            raise IntegrationError(
                f"term not integrable: {render(term.to_expr())}"
            )
        return mul(coeff, deriv(marker.inner, ((WAVE_VARIABLE, k - 1),)))

    # pattern (b)/(c): coeff * P^k * P'
    if len(markers) == 1 and markers[0][1] == 1:
        marker = markers[0][0]
        if (
            isinstance(marker.inner, Sym)
            and marker.inner.name in profiles
            and marker.orders == ((WAVE_VARIABLE, 1),)
        ):
            p_name = marker.inner.name
            exponent: Expr = const(profile_syms.pop(p_name, 0))
            for atom, e in symbolic_powers:
                if atom.base.name != p_name:
                    raise IntegrationError(
                        f"mixed profiles in term: {render(term.to_expr())}"
                    )
                exponent = add(exponent, mul(atom.exponent, const(e)))
            if profile_syms or any(a.base.name != p_name for a, _ in symbolic_powers):
                raise IntegrationError(
                    f"mixed profiles in term: {render(term.to_expr())}"
                )
            new_exp = add(exponent, const(1))
            if poly_zero_check(new_exp):
                raise IntegrationError(
                    f"term integrates to a logarithm: {render(term.to_expr())}"
                )
            return mul(coeff, pow_(sym(p_name), new_exp), pow_(new_exp, const(-1)))

    raise IntegrationError(f"term not integrable: {render(term.to_expr())}")


# ---------------------------------------------------------------------------
# elimination of a secondary profile


def eliminate(ode: TravelingWaveODE, solve_for: str, into: int) -> TravelingWaveODE:
    """Solve one equation linearly for `solve_for` and substitute into another."""
    target = solve_for
    if ode.problem is not None and solve_for in ode.problem.unknowns:
        target = ode.problem.profile_name(solve_for)
    if target not in ode.profiles:
        raise EliminationError(f"{solve_for!r} is not a profile of this system")
    if not (0 <= into < len(ode.equations)):
        raise EliminationError(f"equation index {into} out of range")

    profiles = set(ode.profiles)
    source_idx = None
    relation = None
    for idx, eq in enumerate(ode.equations):
        if idx == into:
            continue
        rel = _solve_linear(eq, target, profiles)
        if rel is not None:
            source_idx = idx
            relation = rel
            break
    if relation is None:
        raise EliminationError(
            f"no equation is linear in {target} with an invertible coefficient"
        )

    new_equations = []
    for idx, eq in enumerate(ode.equations):
        if idx == source_idx:
            continue
        substituted = substitute(eq, {target: relation})
        substituted, _ = orient_by_top_derivative(substituted)
        new_equations.append(substituted)
    return TravelingWaveODE(
        problem=ode.problem,
        profiles=[p for p in ode.profiles if p != target],
        equations=new_equations,
        removed_factors=list(ode.removed_factors),
        speed=ode.speed,
        wave_sign=ode.wave_sign,
        integration_constants=ode.integration_constants,
        eliminations=list(ode.eliminations) + [(target, relation)],
        transform=ode.transform,
    )


def _solve_linear(eq: Expr, target: str, profiles) -> Expr | None:
    """Solve eq == 0 for `target`; needs degree 1 and a z-free coefficient."""
    coeff_terms = []
    rest_terms = []
    for term in expand_to_terms(eq):
        deg = term.sym_powers.get(target, 0)
        for atom in term.atom_powers:
            if target in free_symbols(atom):
                return None
        if deg == 0:
            rest_terms.append(term.to_expr())
        elif deg == 1:
            reduced = Term(
                term.coeff,
                {s: e for s, e in term.sym_powers.items() if s != target},
                term.atom_powers,
                term.divisor,
            )
            coeff_terms.append(reduced.to_expr())
        else:
            return None
    if not coeff_terms:
        return None
    coefficient = add(*coeff_terms)
    if not _is_z_free(coefficient, profiles):
        return None
    rest = add(*rest_terms) if rest_terms else const(0)
    return mul(Const(GaussianRational(-1)), rest, pow_(coefficient, const(-1)))
