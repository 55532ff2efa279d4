"""Homogeneous balance and the power transform that makes it an integer.

Assigning degree M to the profile and M+k to its k-th derivative, each
additive term of a single-profile ODE has total degree p*M + r with p a
polynomial in the symbolic exponent(s) and r the accumulated derivative
order.  The balance order M equates the top derivative-bearing degree with a
pure power degree, subject to the requirement that the balanced pair really
attains the maximum; the result is an exact ratio of polynomials.

When M is not an integer, substituting profile = V^p for a suitable exponent
p (for equations of the shapes handled here, p = +/- 1/(n-1)) and clearing
the minimal power of V produces an equation that balances to an integer.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import BalanceError, NonPolynomialError, TransformError
from .expr_core import (
    Const,
    Deriv,
    Expr,
    GaussianRational,
    Poly,
    Pow,
    Sym,
    add,
    const,
    differentiate,
    expand_derivatives,
    expr_to_ratfun,
    mul,
    pow_,
    render,
    sym,
)
from .pde_frontend import (
    Term,
    TravelingWaveODE,
    PowerTransformRecord,
    WAVE_VARIABLE,
    expand_to_terms,
    sign_normalize,
    terms_to_expr,
)

_SAMPLE_BASES = (2, 3, 5)


@dataclass
class BalanceResult:
    """Exact balance order M = numerator/denominator."""

    numerator: Poly
    denominator: Poly

    def to_expr(self) -> Expr:
        num_e = self.numerator.to_expr()
        if self.denominator.is_constant and self.denominator.constant_value().is_one:
            return num_e
        return mul(num_e, pow_(self.denominator.to_expr(), const(-1)))

    def as_integer(self) -> int | None:
        """Integer value when numerator is exactly divisible by denominator."""
        q = self.numerator.divide_exact(self.denominator)
        if q is None or not q.is_constant:
            return None
        value = q.constant_value()
        if not value.is_integer:
            return None
        return int(value.re)

    def equals(self, other_expr: Expr) -> bool:
        from .expr_core import poly_zero_check

        return poly_zero_check(add(self.to_expr(), mul(Const(GaussianRational(-1)), other_expr)))

    def sample(self, point: dict) -> Fraction | None:
        den = self.denominator.eval(point)
        if den == 0:
            return None
        num = self.numerator.eval(point)
        # exact inputs, so real rational arithmetic survives the round trip
        return Fraction(num.real) / Fraction(den.real)

    def __repr__(self):
        return f"BalanceResult({render(self.to_expr())})"


def _expr_to_poly(e: Expr) -> Poly:
    num, den, table = expr_to_ratfun(e)
    if table.by_expr:
        raise NonPolynomialError(f"exponent is not polynomial: {render(e)}")
    if not den.is_constant:
        raise NonPolynomialError(f"exponent has a denominator: {render(e)}")
    return num * (GaussianRational(1) / den.constant_value())


def _term_degree(term: Term, profile: str) -> tuple[Poly, int]:
    """(profile-power polynomial p, derivative-order r) of one term."""
    p = Poly.constant(term.sym_powers.get(profile, 0))
    r = 0
    for atom, e in term.atom_powers.items():
        if isinstance(atom, Deriv):
            if not (isinstance(atom.inner, Sym) and atom.inner.name == profile):
                raise BalanceError(
                    f"composite derivative left unexpanded: {render(atom)}"
                )
            p = p + Poly.constant(e)
            r += atom.total_order * e
        elif (
            isinstance(atom, Pow)
            and isinstance(atom.base, Sym)
            and atom.base.name == profile
        ):
            p = p + _expr_to_poly(atom.exponent) * e
        else:
            from .expr_core import free_symbols

            if profile in free_symbols(atom):
                raise BalanceError(f"non-polynomial profile dependence: {render(atom)}")
    return p, r


def _sample_points(symbols, rounds=len(_SAMPLE_BASES)):
    points = []
    for r in range(rounds):
        base = _SAMPLE_BASES[r]
        points.append({s: base + j for j, s in enumerate(sorted(symbols))})
    return points


def compute_balance(ode: TravelingWaveODE) -> BalanceResult:
    """Balance order of a single-profile polynomial ODE (exact, possibly a
    ratio of linear forms in a symbolic exponent)."""
    if len(ode.equations) != 1 or len(ode.profiles) != 1:
        raise BalanceError("balancing needs a single-profile, single-equation ODE")
    profile = ode.profiles[0]
    expanded = expand_derivatives(ode.equations[0], dependent=frozenset([profile]))
    degrees = [
        _term_degree(t, profile) for t in expand_to_terms(expanded)
    ]
    deriv_terms = [(p, r) for p, r in degrees if r >= 1]
    power_terms = [(p, r) for p, r in degrees if r == 0 and not p.is_zero]
    if not deriv_terms:
        raise BalanceError("no derivative-bearing term to balance")
    if not power_terms:
        raise BalanceError("no pure power term to balance against")

    sym_names = set()
    for p, _ in degrees:
        sym_names |= set(p.used_symbols())
    points = _sample_points(sym_names)

    candidates: list[tuple[BalanceResult, Poly]] = []
    seen = []
    for pd, rd in deriv_terms:
        for pp, rp in power_terms:
            den = pd - pp
            if den.is_zero:
                continue
            num = Poly.constant(rp - rd)
            if num.is_zero:
                continue
            # normalize to a monic denominator for dedup/rendering
            den_monic, lead = den.monic_primitive()
            num_scaled = num * (GaussianRational(1) / lead)
            key = (num_scaled, den_monic)
            if any(num_scaled * d2 == n2 * den_monic for n2, d2 in seen):
                continue
            seen.append(key)
            candidates.append((BalanceResult(num_scaled, den_monic), pp))

    survivors = []
    for cand, pp in candidates:
        ok = True
        for point in points:
            m = cand.sample(point)
            if m is None:
                continue
            if m == 0:
                ok = False
                break
            vals = []
            for p, r in degrees:
                pv = p.eval(point)
                vals.append(Fraction(pv.real) * m + r)
            top = max(vals)
            attained = sum(1 for v in vals if v == top)
            pair_val = Fraction(pp.eval(point).real) * m
            if attained < 2 or pair_val != top:
                ok = False
                break
        if ok:
            survivors.append((cand, pp))

    if not survivors:
        raise BalanceError(
            "degree equation unsolvable: no balance order makes the top degrees match"
        )
    distinct: list[BalanceResult] = []
    for cand, _ in survivors:
        if not any(
            cand.numerator * other.denominator == other.numerator * cand.denominator
            for other in distinct
        ):
            distinct.append(cand)
    if len(distinct) > 1:
        # prefer the candidate from the highest-power nonlinear partner
        point = points[0]
        survivors.sort(key=lambda cp: Fraction(cp[1].eval(point).real), reverse=True)
        top_p = survivors[0][1].eval(point).real
        tied = [
            c
            for c, pp in survivors
            if pp.eval(point).real == top_p
        ]
        head = tied[0]
        for other in tied[1:]:
            if head.numerator * other.denominator != other.numerator * head.denominator:
                raise BalanceError(
                    "ambiguous balance: "
                    + ", ".join(render(c.to_expr()) for c in distinct)
                )
        return head
    return distinct[0]


# ---------------------------------------------------------------------------
# power transform


def _clear_rational_denominators(e: Expr) -> Expr:
    """Scale an equation so every expanded coefficient is a (Gaussian)
    integer; keeps instantiated and symbolic transform outputs comparable."""
    from math import lcm

    terms = expand_to_terms(e)
    denominators = [1]
    for t in terms:
        denominators.append(t.coeff.re.denominator)
        denominators.append(t.coeff.im.denominator)
    scale = lcm(*denominators)
    if scale == 1:
        return terms_to_expr(terms)
    scaled = [
        Term(t.coeff * GaussianRational(scale), t.sym_powers, t.atom_powers, t.divisor)
        for t in terms
    ]
    return terms_to_expr(scaled)


def _collect_profile_powers(e: Expr, profile: str) -> set:
    found = set()

    def walk(node):
        if isinstance(node, Pow):
            if isinstance(node.base, Sym) and node.base.name == profile:
                found.add(node)
            walk(node.base)
            walk(node.exponent)
        elif isinstance(node, Deriv):
            walk(node.inner)
        elif hasattr(node, "args"):
            for a in node.args:
                walk(a)
        elif hasattr(node, "arg"):
            walk(node.arg)

    walk(e)
    return found


def power_transform(ode: TravelingWaveODE, p: Expr) -> TravelingWaveODE:
    """Substitute profile = V^p and clear the minimal power of V.

    The cleared exponents must come out as nonnegative integers (they do for
    p = +/-1/(n-1) on the supported equation shapes); a residual fractional
    power is an error naming the offending term.  Coefficient denominators
    are cleared by the recorded common multiplier.
    """
    if len(ode.equations) != 1 or len(ode.profiles) != 1:
        raise TransformError("power transform needs a single-profile ODE")
    old = ode.profiles[0]
    new = "V" if old != "V" else "W"

    expanded = expand_derivatives(ode.equations[0], dependent=frozenset([old]))

    max_order = 0
    for t in expand_to_terms(expanded):
        for atom in t.atom_powers:
            if isinstance(atom, Deriv):
                max_order = max(max_order, atom.total_order)

    v_pow = pow_(sym(new), p)
    mapping = {sym(old): v_pow}
    for node in _collect_profile_powers(expanded, old):
        mapping[node] = pow_(sym(new), mul(p, node.exponent))
    dk = v_pow
    for k in range(1, max_order + 1):
        dk = differentiate(dk, WAVE_VARIABLE, dependent=frozenset([new]))
        mapping[Deriv(Sym(old), ((WAVE_VARIABLE, k),))] = dk

    from .expr_core import replace_nodes

    replaced = replace_nodes(expanded, mapping)

    terms = expand_to_terms(replaced)
    infos = []
    for term in terms:
        exp_expr = const(term.sym_powers.get(new, 0))
        coeff_factors = [Const(term.coeff)]
        markers = []
        for s, e in sorted(term.sym_powers.items()):
            if s != new and e:
                coeff_factors.append(pow_(sym(s), const(e)))
        for atom, e in term.atom_powers.items():
            if isinstance(atom, Pow) and isinstance(atom.base, Sym) and atom.base.name == new:
                exp_expr = add(exp_expr, mul(atom.exponent, const(e)))
            elif isinstance(atom, Deriv):
                if not (isinstance(atom.inner, Sym) and atom.inner.name == new):
                    raise TransformError(f"unsupported term: {render(term.to_expr())}")
                markers.append((atom, e))
            else:
                raise TransformError(f"unsupported term: {render(term.to_expr())}")
        if term.divisor is not None:
            coeff_factors.append(pow_(term.divisor, const(-1)))
        enum, eden, etable = expr_to_ratfun(exp_expr)
        if etable.by_expr or eden.is_zero:
            raise TransformError(f"bad exponent in term: {render(term.to_expr())}")
        infos.append(
            {
                "coeff": mul(*coeff_factors),
                "markers": markers,
                "enum": enum,
                "eden": eden,
                "term": term,
            }
        )

    # pairwise exponent differences must be integers
    base = infos[0]
    deltas = []
    for info in infos:
        dnum = info["enum"] * base["eden"] - base["enum"] * info["eden"]
        dden = info["eden"] * base["eden"]
        if dnum.is_zero:
            deltas.append(0)
            continue
        q = dnum.divide_exact(dden)
        if q is None or not q.is_constant or not q.constant_value().is_integer:
            raise TransformError(
                "residual fractional power of the transformed profile in term: "
                f"{render(info['term'].to_expr())}"
            )
        deltas.append(int(q.constant_value().re))
    low = min(deltas)

    # group monomials sharing a cleared V power and marker signature, sum
    # their coefficients as one fraction, and reduce it by the exponent's
    # denominator (the only non-constant factor a denominator can carry)
    pnum, pden, ptab = expr_to_ratfun(p)
    if ptab.by_expr:
        raise TransformError(f"unsupported transform exponent {render(p)}")
    pden, _ = pden.monic_primitive()

    groups: dict = {}
    group_order = []
    for info, delta in zip(infos, deltas):
        marker_key = tuple(
            sorted((render(atom), e) for atom, e in info["markers"])
        )
        key = (delta - low, marker_key)
        if key not in groups:
            groups[key] = {"markers": info["markers"], "num": None, "den": None}
            group_order.append(key)
        cnum, cden, ctable = expr_to_ratfun(info["coeff"])
        if ctable.by_expr:
            raise TransformError(
                f"unsupported coefficient in term: {render(info['term'].to_expr())}"
            )
        slot = groups[key]
        if slot["num"] is None:
            slot["num"], slot["den"] = cnum, cden
        else:
            slot["num"] = slot["num"] * cden + cnum * slot["den"]
            slot["den"] = slot["den"] * cden

    reduced = []
    dens = []
    for key in group_order:
        slot = groups[key]
        cnum, cden = slot["num"], slot["den"]
        den_monic, lead = cden.monic_primitive()
        cnum = cnum * (GaussianRational(1) / lead)
        while not den_monic.is_constant and not pden.is_constant:
            qd = den_monic.divide_exact(pden)
            if qd is None:
                break
            qn = cnum.divide_exact(pden)
            if qn is None:
                break
            cnum, den_monic = qn, qd
        if cnum.is_zero:
            continue
        reduced.append((key, cnum, den_monic, slot["markers"]))
        dens.append(den_monic)

    common = Poly.constant(1)
    for d in dens:
        if common.divide_exact(d) is not None:
            continue
        q = d.divide_exact(common)
        common = d if q is not None else common * d

    new_terms = []
    for (k, _), cnum, cden, markers in reduced:
        extra = common.divide_exact(cden)
        if extra is None:  # pragma: no cover - common is a multiple by construction
            raise TransformError("internal denominator clearing failure")
        coeff_poly = cnum * extra
        factors = [coeff_poly.to_expr(), pow_(sym(new), const(k))]
        for atom, e in markers:
            factors.append(pow_(atom, const(e)))
        new_terms.append(mul(*factors))

    equation = add(*new_terms)
    equation = _clear_rational_denominators(equation)
    equation, _ = sign_normalize(equation)

    # -e_min, the power of V the equation was multiplied by
    emin_num = base["enum"] + base["eden"] * low
    clearing = mul(
        Const(GaussianRational(-1)),
        emin_num.to_expr(),
        pow_(base["eden"].to_expr(), const(-1)),
    )

    record = PowerTransformRecord(
        exponent=p,
        old_profile=old,
        new_profile=new,
        clearing_exponent=clearing,
        coefficient_multiplier=common.to_expr(),
    )
    return TravelingWaveODE(
        problem=ode.problem,
        profiles=[new],
        equations=[equation],
        removed_factors=list(ode.removed_factors),
        speed=ode.speed,
        wave_sign=ode.wave_sign,
        integration_constants=ode.integration_constants,
        eliminations=list(ode.eliminations),
        transform=record,
    )
