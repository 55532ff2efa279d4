"""Sparse multivariate (Laurent) polynomials and polynomial normal forms.

`Poly` is the workhorse: a map from exponent vectors over a sorted symbol
tuple to exact GaussianRational coefficients.  Expressions are lowered to
pairs (numerator Poly, denominator Poly); subexpressions that are not
polynomial themselves (derivative markers, symbolic powers, radicals,
function values) become opaque *atom* symbols via an AtomTable, and each
distinct sqrt argument additionally records the relation  s^2 = argument
used to eliminate even radical powers.

`PolyForm` regroups a Poly by a set of *main* symbols: a map from main-symbol
exponent vectors (Laurent, negative exponents allowed) to coefficient
polynomials in the remaining symbols.
"""

from __future__ import annotations

from fractions import Fraction

from ..errors import NonPolynomialError, ZeroDenominatorError
from .gaussian import GaussianRational, ONE, ZERO
from .nodes import (
    Add,
    Const,
    Deriv,
    Expr,
    Fn,
    Mul,
    Pow,
    Sym,
    add,
    const,
    free_symbols,
    mul,
    pow_,
    render,
    sym,
)


class Poly:
    __slots__ = ("symbols", "terms")

    def __init__(self, symbols=(), terms=None):
        self.symbols = tuple(symbols)
        self.terms = {} if terms is None else terms

    # -- constructors --------------------------------------------------
    @classmethod
    def constant(cls, value) -> "Poly":
        gr = GaussianRational.from_value(value)
        if gr.is_zero:
            return cls()
        return cls((), {(): gr})

    @classmethod
    def variable(cls, name: str) -> "Poly":
        return cls((name,), {(1,): ONE})

    # -- basics ---------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(all(e == 0 for e in mono) for mono in self.terms)

    def constant_value(self) -> GaussianRational:
        if self.is_zero:
            return ZERO
        if not self.is_constant:
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()))

    def used_symbols(self) -> tuple:
        used = [False] * len(self.symbols)
        for mono in self.terms:
            for idx, e in enumerate(mono):
                if e:
                    used[idx] = True
        return tuple(s for s, u in zip(self.symbols, used) if u)

    def compact(self) -> "Poly":
        """Drop unused symbol slots."""
        keep = self.used_symbols()
        if keep == self.symbols:
            return self
        idxs = [self.symbols.index(s) for s in keep]
        terms = {}
        for mono, coeff in self.terms.items():
            terms[tuple(mono[j] for j in idxs)] = coeff
        return Poly(keep, terms)

    def _aligned(self, other: "Poly"):
        if self.symbols == other.symbols:
            return self.symbols, self.terms, other.terms
        merged = tuple(sorted(set(self.symbols) | set(other.symbols)))

        def remap(poly):
            idx = [poly.symbols.index(s) if s in poly.symbols else None for s in merged]
            out = {}
            for mono, coeff in poly.terms.items():
                out[tuple(0 if j is None else mono[j] for j in idx)] = coeff
            return out

        return merged, remap(self), remap(other)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(other)
        symbols, a, b = self._aligned(other)
        out = dict(a)
        for mono, coeff in b.items():
            acc = out.get(mono)
            s = coeff if acc is None else acc + coeff
            if s.is_zero:
                out.pop(mono, None)
            else:
                out[mono] = s
        return Poly(symbols, out)

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(other)
        return self + (-other)

    def __neg__(self):
        return Poly(self.symbols, {m: -c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational)):
            gr = GaussianRational.from_value(other)
            if gr.is_zero:
                return Poly()
            return Poly(self.symbols, {m: c * gr for m, c in self.terms.items()})
        symbols, a, b = self._aligned(other)
        out: dict = {}
        for m1, c1 in a.items():
            for m2, c2 in b.items():
                mono = tuple(x + y for x, y in zip(m1, m2))
                prod = c1 * c2
                acc = out.get(mono)
                s = prod if acc is None else acc + prod
                if s.is_zero:
                    out.pop(mono, None)
                else:
                    out[mono] = s
        return Poly(symbols, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative Poly power")
        result = Poly.constant(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return (self - other).is_zero

    def __hash__(self):
        c = self.compact()
        return hash((c.symbols, tuple(sorted(c.terms.items(), key=lambda kv: kv[0]))))

    # -- calculus / evaluation --------------------------------------------
    def diff(self, name: str) -> "Poly":
        if name not in self.symbols:
            return Poly()
        j = self.symbols.index(name)
        out = {}
        for mono, coeff in self.terms.items():
            e = mono[j]
            if e == 0:
                continue
            new = list(mono)
            new[j] = e - 1
            key = tuple(new)
            c = coeff * GaussianRational(e)
            acc = out.get(key)
            s = c if acc is None else acc + c
            if s.is_zero:
                out.pop(key, None)
            else:
                out[key] = s
        return Poly(self.symbols, out)

    def eval(self, point: dict) -> complex:
        total = 0j
        for mono, coeff in self.terms.items():
            v = coeff.to_complex()
            for s, e in zip(self.symbols, mono):
                if e:
                    v *= complex(point[s]) ** e
            total += v
        return total

    def partial_eval(self, bindings: dict) -> "Poly":
        """Substitute exact values for some symbols; stays exact."""
        if not any(s in bindings for s in self.symbols):
            return self
        vals = {s: GaussianRational.from_value(v) for s, v in bindings.items()}
        keep = [s for s in self.symbols if s not in vals]
        out: dict = {}
        for mono, coeff in self.terms.items():
            factor = coeff
            key = []
            for s, e in zip(self.symbols, mono):
                if s in vals:
                    if e:
                        factor = factor * vals[s] ** e
                else:
                    key.append(e)
            key = tuple(key)
            acc = out.get(key)
            s_ = factor if acc is None else acc + factor
            if s_.is_zero:
                out.pop(key, None)
            else:
                out[key] = s_
        return Poly(tuple(keep), out)

    # -- structure ----------------------------------------------------------
    def degree_in(self, name: str) -> int:
        if name not in self.symbols or self.is_zero:
            return 0
        j = self.symbols.index(name)
        return max(mono[j] for mono in self.terms)

    def as_poly_in(self, name: str) -> dict:
        """View as a univariate polynomial in `name` with Poly coefficients."""
        if name not in self.symbols:
            return {0: self}
        j = self.symbols.index(name)
        rest = self.symbols[:j] + self.symbols[j + 1 :]
        groups: dict = {}
        for mono, coeff in self.terms.items():
            k = mono[j]
            groups.setdefault(k, {})[mono[:j] + mono[j + 1 :]] = coeff
        return {k: Poly(rest, terms) for k, terms in groups.items()}

    def _grlex_key(self, mono):
        return (sum(mono), mono)

    def leading(self):
        """(monomial, coefficient) maximal in degree-lex order."""
        if self.is_zero:
            raise ValueError("zero polynomial has no leading term")
        mono = max(self.terms, key=self._grlex_key)
        return mono, self.terms[mono]

    def leading_coefficient(self) -> GaussianRational:
        return self.leading()[1]

    def monic_primitive(self):
        """(scaled poly, scalar) with positive leading rational and
        denominator-free integer coefficients where possible."""
        if self.is_zero:
            return self, ONE
        lead = self.leading_coefficient()
        scale = GaussianRational(1) / lead
        return self * scale, lead

    def divide_exact(self, divisor: "Poly"):
        """Multivariate exact division; None if the remainder is nonzero.

        Requires nonnegative exponents in both operands.
        """
        if divisor.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        for mono in list(self.terms) + list(divisor.terms):
            if any(e < 0 for e in mono):
                raise ValueError("exact division needs nonnegative exponents")
        symbols, a, b = self._aligned(divisor)
        rem = Poly(symbols, dict(a))
        den = Poly(symbols, dict(b))
        dmono, dcoeff = den.leading()
        quot = Poly(symbols, {})
        while not rem.is_zero:
            rmono, rcoeff = rem.leading()
            qmono = tuple(x - y for x, y in zip(rmono, dmono))
            if any(e < 0 for e in qmono):
                return None
            qcoeff = rcoeff / dcoeff
            qterm = Poly(symbols, {qmono: qcoeff})
            quot = quot + qterm
            rem = rem - qterm * den
        return quot

    # -- rendering -----------------------------------------------------------
    def to_expr(self, atom_exprs: dict | None = None) -> Expr:
        atom_exprs = atom_exprs or {}
        terms = []
        for mono, coeff in sorted(
            self.terms.items(), key=lambda kv: self._grlex_key(kv[0]), reverse=True
        ):
            factors = [Const(coeff)]
            for s, e in zip(self.symbols, mono):
                if e:
                    base = atom_exprs.get(s, sym(s))
                    factors.append(pow_(base, const(e)))
            terms.append(mul(*factors))
        return add(*terms) if terms else const(0)

    def render(self, atom_exprs: dict | None = None) -> str:
        return render(self.to_expr(atom_exprs))

    def __repr__(self):
        return f"Poly({self.render()})"


# ---------------------------------------------------------------------------
# atoms and expression lowering


class AtomTable:
    """Registry of non-polynomial subexpressions treated as fresh symbols."""

    PREFIX = "$a"

    def __init__(self):
        self.by_expr: dict = {}
        self.exprs: dict = {}
        self.radicals: dict = {}  # atom name -> (num Poly, den Poly) with s^2 = num/den

    def intern(self, node: Expr) -> str:
        name = self.by_expr.get(node)
        if name is None:
            name = f"{self.PREFIX}{len(self.by_expr)}"
            self.by_expr[node] = name
            self.exprs[name] = node
        return name

    def is_atom(self, name: str) -> bool:
        return name in self.exprs


class RatFun:
    """Numerator/denominator pair; no gcd reduction is attempted."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly | None = None):
        self.num = num
        self.den = Poly.constant(1) if den is None else den

    def __add__(self, other):
        return RatFun(self.num * other.den + other.num * self.den, self.den * other.den)

    def __mul__(self, other):
        return RatFun(self.num * other.num, self.den * other.den)

    def __neg__(self):
        return RatFun(-self.num, self.den)

    def inverse(self):
        if self.num.is_zero:
            raise ZeroDenominatorError("division by an identically-zero expression")
        return RatFun(self.den, self.num)

    def power(self, k: int):
        if k >= 0:
            return RatFun(self.num**k, self.den**k)
        inv = self.inverse()
        return RatFun(inv.num ** (-k), inv.den ** (-k))


def expr_to_ratfun(
    e: Expr,
    main: frozenset = frozenset(),
    table: AtomTable | None = None,
    strict: bool = True,
) -> tuple[Poly, Poly, AtomTable]:
    """Lower an expression to (numerator, denominator) polynomials.

    Symbols in `main` may carry negative (Laurent) integer exponents in the
    numerator.  With strict=True, any other non-polynomial structure over a
    main symbol raises NonPolynomialError; with strict=False it becomes an
    opaque atom (used by term expansion, where every symbol is "main").
    sqrt nodes become radical atoms with a recorded square relation.
    """
    table = table or AtomTable()

    def lower(node: Expr) -> RatFun:
        if isinstance(node, Const):
            return RatFun(Poly.constant(node.value))
        if isinstance(node, Sym):
            return RatFun(Poly.variable(node.name))
        if isinstance(node, Add):
            total = lower(node.args[0])
            for a in node.args[1:]:
                total = total + lower(a)
            return total
        if isinstance(node, Mul):
            total = lower(node.args[0])
            for a in node.args[1:]:
                total = total * lower(a)
            return total
        if isinstance(node, Pow):
            exp = node.exponent
            if isinstance(exp, Const) and exp.value.is_integer:
                k = int(exp.value.re)
                if isinstance(node.base, Sym) and node.base.name in main:
                    return RatFun(Poly((node.base.name,), {(k,): ONE}))
                return lower(node.base).power(k)
            # symbolic or fractional exponent: opaque atom
            if strict and (free_symbols(node.base) & main or free_symbols(exp) & main):
                raise NonPolynomialError(
                    f"non-polynomial dependence on a main symbol: {render(node)}"
                )
            return RatFun(Poly.variable(table.intern(node)))
        if isinstance(node, Fn):
            if strict and free_symbols(node.arg) & main:
                raise NonPolynomialError(
                    f"non-polynomial dependence on a main symbol: {render(node)}"
                )
            name = table.intern(node)
            if node.name == "sqrt" and name not in table.radicals:
                an, ad, _ = expr_to_ratfun(node.arg, frozenset(), table)
                table.radicals[name] = (an, ad)
            return RatFun(Poly.variable(name))
        if isinstance(node, Deriv):
            return RatFun(Poly.variable(table.intern(node)))
        raise TypeError(type(node))

    rf = lower(e)
    if rf.den.is_zero:
        raise ZeroDenominatorError("identically-zero denominator")
    return rf.num, rf.den, table


def reduce_radicals(num: Poly, den: Poly, table: AtomTable) -> tuple[Poly, Poly]:
    """Rewrite even powers of radical atoms using s^2 = argument."""
    for _ in range(16):
        target = None
        for name, (an, ad) in table.radicals.items():
            if name in num.symbols and num.degree_in(name) >= 2:
                target = (name, an, ad)
                break
        if target is None:
            return num, den
        name, an, ad = target
        groups = num.as_poly_in(name)
        half_max = max(k // 2 for k in groups)
        new = Poly()
        for k, coeff in groups.items():
            h = k // 2
            part = coeff * (an**h) * (ad ** (half_max - h))
            if k % 2:
                part = part * Poly.variable(name)
            new = new + part
        num = new
        den = den * (ad**half_max)
    raise NonPolynomialError("radical reduction did not terminate")


def poly_zero_check(e: Expr, main=None) -> bool:
    """Exact zero test for a rational expression (no numeric tolerance).

    Denominators are cleared first; even radical powers are eliminated via
    their defining relation.  True means identically zero; False means a
    nonzero normal form remained.
    """
    main_set = frozenset(main) if main else frozenset()
    num, den, table = expr_to_ratfun(e, main_set)
    if den.is_zero:
        raise ZeroDenominatorError("identically-zero denominator")
    num, _ = reduce_radicals(num, den, table)
    return num.is_zero


def cleared_numerator(e: Expr, main=None) -> tuple[Poly, AtomTable]:
    """Numerator after clearing denominators and reducing radicals."""
    main_set = frozenset(main) if main else frozenset()
    num, den, table = expr_to_ratfun(e, main_set)
    if den.is_zero:
        raise ZeroDenominatorError("identically-zero denominator")
    num, _ = reduce_radicals(num, den, table)
    return num, table


# ---------------------------------------------------------------------------
# polynomial normal form over selected main symbols


class PolyForm:
    """Fully expanded (Laurent) normal form over a main symbol set.

    terms: map from main exponent vectors to coefficient Poly over the
    remaining symbols.  The zero polynomial is the empty map.
    """

    def __init__(self, main_symbols, terms: dict, table: AtomTable | None = None):
        self.main_symbols = tuple(main_symbols)
        self.terms = {m: c for m, c in terms.items() if not c.is_zero}
        self.table = table or AtomTable()

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def min_exponents(self) -> tuple:
        """Laurent offset per main symbol (all zeros if no negative powers)."""
        if not self.terms:
            return tuple(0 for _ in self.main_symbols)
        return tuple(
            min(min(m[j] for m in self.terms), 0)
            for j in range(len(self.main_symbols))
        )

    def max_exponents(self) -> tuple:
        if not self.terms:
            return tuple(0 for _ in self.main_symbols)
        return tuple(
            max(m[j] for m in self.terms) for j in range(len(self.main_symbols))
        )

    def coefficient(self, mono) -> Poly:
        return self.terms.get(tuple(mono), Poly())

    def shift(self, offsets) -> "PolyForm":
        out = {
            tuple(e + o for e, o in zip(m, offsets)): c for m, c in self.terms.items()
        }
        return PolyForm(self.main_symbols, out, self.table)

    def __eq__(self, other):
        if not isinstance(other, PolyForm):
            return NotImplemented
        if self.main_symbols != other.main_symbols:
            return False
        if set(self.terms) != set(other.terms):
            return False
        return all(self.terms[m] == other.terms[m] for m in self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def to_expr(self) -> Expr:
        terms = []
        for mono, coeff in sorted(self.terms.items()):
            factors = [coeff.to_expr(self.table.exprs)]
            for s, e in zip(self.main_symbols, mono):
                if e:
                    factors.append(pow_(sym(s), const(e)))
            terms.append(mul(*factors))
        return add(*terms) if terms else const(0)

    def __repr__(self):
        return f"PolyForm({render(self.to_expr())})"


def expand_normalize(e: Expr, main_symbols) -> PolyForm:
    """Expand and collect `e` as a Laurent polynomial in `main_symbols`.

    Coefficients must come out polynomial in the remaining symbols up to a
    constant rational denominator; otherwise NonPolynomialError is raised.
    """
    main = tuple(sorted(set(main_symbols)))
    num, den, table = expr_to_ratfun(e, frozenset(main))
    if den.is_zero:
        raise ZeroDenominatorError("identically-zero denominator")
    if not den.is_constant:
        raise NonPolynomialError(
            "denominator is not constant; normal form would not be polynomial: "
            f"{den.render(table.exprs)}"
        )
    scale = GaussianRational(1) / den.constant_value()
    num = num * scale
    idx = {s: num.symbols.index(s) if s in num.symbols else None for s in main}
    groups: dict = {}
    for mono, coeff in num.terms.items():
        key = tuple(0 if idx[s] is None else mono[idx[s]] for s in main)
        rest = tuple(
            exp
            for s, exp in zip(num.symbols, mono)
            if s not in main
        )
        rest_syms = tuple(s for s in num.symbols if s not in main)
        groups.setdefault(key, {})[rest] = coeff
    rest_syms = tuple(s for s in num.symbols if s not in main)
    terms = {k: Poly(rest_syms, v) for k, v in groups.items()}
    return PolyForm(main, terms, table)


def exprs_equal(a: Expr, b: Expr) -> bool:
    """Exact equality of two expressions as rational functions."""
    return poly_zero_check(add(a, mul(Const(GaussianRational(-1)), b)))
