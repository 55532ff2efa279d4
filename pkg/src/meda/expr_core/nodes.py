"""Immutable symbolic expression trees.

Node kinds: exact complex-rational constants, symbols, n-ary sums and
products, powers with arbitrary expression exponents, the elementary
functions tan/cot/tanh/coth/sqrt, and derivative markers ``D(expr, v, ...)``
that stand for partial derivatives not yet carried out.

Construction goes through the smart constructors (`add`, `mul`, `pow_`, ...)
which put every tree into a canonical form: constants folded, sums and
products flattened and sorted, like terms and like factors combined.  Equal
canonical forms compare (and hash) equal, so expressions are safe dict keys.
"""

from __future__ import annotations

import cmath
from fractions import Fraction

from ..errors import DerivativeError, EvalError, PoleError
from .gaussian import GaussianRational, IUNIT, ONE, ZERO

FUNCTION_NAMES = ("tan", "cot", "tanh", "coth", "sqrt")

#: magnitude below which trig/hyperbolic denominators count as poles
POLE_GUARD = 1e-6


class Expr:
    __slots__ = ()

    # operator sugar; everything funnels into the smart constructors
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, mul(MINUS_ONE, _lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), mul(MINUS_ONE, self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return mul(self, pow_(_lift(other), MINUS_ONE))

    def __rtruediv__(self, other):
        return mul(_lift(other), pow_(self, MINUS_ONE))

    def __pow__(self, other):
        return pow_(self, _lift(other))

    def __neg__(self):
        return mul(MINUS_ONE, self)

    def __repr__(self):
        return render(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: GaussianRational):
        object.__setattr__(self, "value", value)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return type(other) is Const and self.value == other.value

    def __hash__(self):
        return hash(("Const", self.value))


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return type(other) is Sym and self.name == other.name

    def __hash__(self):
        return hash(("Sym", self.name))


class Add(Expr):
    __slots__ = ("args",)

    def __init__(self, args):
        object.__setattr__(self, "args", tuple(args))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return type(other) is Add and self.args == other.args

    def __hash__(self):
        return hash(("Add", self.args))


class Mul(Expr):
    __slots__ = ("args",)

    def __init__(self, args):
        object.__setattr__(self, "args", tuple(args))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return type(other) is Mul and self.args == other.args

    def __hash__(self):
        return hash(("Mul", self.args))


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Expr):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return (
            type(other) is Pow
            and self.base == other.base
            and self.exponent == other.exponent
        )

    def __hash__(self):
        return hash(("Pow", self.base, self.exponent))


class Fn(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return type(other) is Fn and self.name == other.name and self.arg == other.arg

    def __hash__(self):
        return hash(("Fn", self.name, self.arg))


class Deriv(Expr):
    """Pending partial derivative: orders is a sorted tuple of (var, k)."""

    __slots__ = ("inner", "orders")

    def __init__(self, inner: Expr, orders):
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "orders", tuple(orders))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return (
            type(other) is Deriv
            and self.inner == other.inner
            and self.orders == other.orders
        )

    def __hash__(self):
        return hash(("Deriv", self.inner, self.orders))

    def order_of(self, var: str) -> int:
        for v, k in self.orders:
            if v == var:
                return k
        return 0

    @property
    def total_order(self) -> int:
        return sum(k for _, k in self.orders)


# ---------------------------------------------------------------------------
# smart constructors


def const(value) -> Const:
    return Const(GaussianRational.from_value(value))


ZERO_E = Const(ZERO)
ONE_E = Const(ONE)
MINUS_ONE = Const(GaussianRational(-1))
I_E = Const(IUNIT)
HALF = Const(GaussianRational(Fraction(1, 2)))


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def sym(name: str) -> Sym:
    return Sym(name)


def sort_key(e: Expr):
    if isinstance(e, Const):
        return (0, e.value.sort_key())
    if isinstance(e, Sym):
        return (1, e.name)
    if isinstance(e, Pow):
        return (2, sort_key(e.base), sort_key(e.exponent))
    if isinstance(e, Fn):
        return (3, e.name, sort_key(e.arg))
    if isinstance(e, Deriv):
        return (4, sort_key(e.inner), e.orders)
    if isinstance(e, Mul):
        return (5, tuple(sort_key(a) for a in e.args))
    if isinstance(e, Add):
        return (6, tuple(sort_key(a) for a in e.args))
    raise TypeError(type(e))


def _split_coeff(e: Expr):
    """Split into (constant coefficient, residual factor expression)."""
    if isinstance(e, Const):
        return e.value, ONE_E
    if isinstance(e, Mul) and isinstance(e.args[0], Const):
        rest = e.args[1:]
        rest_e = rest[0] if len(rest) == 1 else Mul(rest)
        return e.args[0].value, rest_e
    return ONE, e


def add(*args) -> Expr:
    flat = []
    stack = list(args)
    while stack:
        a = stack.pop()
        if isinstance(a, Add):
            stack.extend(a.args)
        else:
            flat.append(a)
    const_acc = ZERO
    by_rest: dict = {}
    order: list = []
    for a in flat:
        coeff, rest = _split_coeff(a)
        if rest == ONE_E:
            const_acc = const_acc + coeff
            continue
        if rest in by_rest:
            by_rest[rest] = by_rest[rest] + coeff
        else:
            by_rest[rest] = coeff
            order.append(rest)
    terms = []
    for rest in order:
        coeff = by_rest[rest]
        if coeff.is_zero:
            continue
        terms.append(rest if coeff.is_one else mul(Const(coeff), rest))
    terms.sort(key=sort_key)
    if not const_acc.is_zero:
        terms.insert(0, Const(const_acc))
    if not terms:
        return ZERO_E
    if len(terms) == 1:
        return terms[0]
    return Add(terms)


def _split_power(e: Expr):
    if isinstance(e, Pow):
        return e.base, e.exponent
    return e, ONE_E


def mul(*args) -> Expr:
    flat = []
    stack = list(args)
    while stack:
        a = stack.pop()
        if isinstance(a, Mul):
            stack.extend(a.args)
        else:
            flat.append(a)
    const_acc = ONE
    by_base: dict = {}
    order: list = []
    for a in flat:
        if isinstance(a, Const):
            const_acc = const_acc * a.value
            continue
        base, exp = _split_power(a)
        if base in by_base:
            by_base[base] = add(by_base[base], exp)
        else:
            by_base[base] = exp
            order.append(base)
    if const_acc.is_zero:
        return ZERO_E
    factors = []
    for base in order:
        p = pow_(base, by_base[base])
        if isinstance(p, Const):
            const_acc = const_acc * p.value
        elif p != ONE_E:
            factors.append(p)
    if const_acc.is_zero:
        return ZERO_E
    factors.sort(key=sort_key)
    if not factors:
        return Const(const_acc)
    if not const_acc.is_one:
        factors.insert(0, Const(const_acc))
    if len(factors) == 1:
        return factors[0]
    return Mul(factors)


def pow_(base: Expr, exponent) -> Expr:
    exponent = _lift(exponent)
    if isinstance(exponent, Const):
        q = exponent.value
        if q.is_zero:
            return ONE_E
        if q.is_one:
            return base
        if q.is_integer:
            k = int(q.re)
            if isinstance(base, Const):
                if base.value.is_zero and k < 0:
                    raise ZeroDivisionError("zero raised to a negative power")
                return Const(base.value**k)
            if isinstance(base, Mul):
                # (x*y)^k = x^k * y^k holds for integer k
                return mul(*(pow_(f, exponent) for f in base.args))
            if isinstance(base, Pow):
                # (x^e)^k = x^(e*k) holds for integer k
                return pow_(base.base, mul(base.exponent, exponent))
    if isinstance(base, Const):
        if base.value.is_one:
            return ONE_E
    return Pow(base, exponent)


def fn(name: str, arg: Expr) -> Expr:
    if name not in FUNCTION_NAMES:
        raise ValueError(f"unknown function {name!r}")
    if name == "sqrt" and isinstance(arg, Const):
        root = arg.value.exact_sqrt()
        if root is not None:
            return Const(root)
    return Fn(name, arg)


def deriv(inner: Expr, orders) -> Expr:
    merged: dict = {}
    if isinstance(inner, Deriv):
        for v, k in inner.orders:
            merged[v] = merged.get(v, 0) + k
        inner = inner.inner
    for v, k in orders:
        if k < 0:
            raise ValueError("negative derivative order")
        merged[v] = merged.get(v, 0) + k
    cleaned = tuple(sorted((v, k) for v, k in merged.items() if k > 0))
    if not cleaned:
        return inner
    return Deriv(inner, cleaned)


# ---------------------------------------------------------------------------
# structural queries


def free_symbols(e: Expr) -> frozenset:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Sym):
        return frozenset((e.name,))
    if isinstance(e, (Add, Mul)):
        out = frozenset()
        for a in e.args:
            out |= free_symbols(a)
        return out
    if isinstance(e, Pow):
        return free_symbols(e.base) | free_symbols(e.exponent)
    if isinstance(e, Fn):
        return free_symbols(e.arg)
    if isinstance(e, Deriv):
        return free_symbols(e.inner) | frozenset(v for v, _ in e.orders)
    raise TypeError(type(e))


def contains_deriv(e: Expr) -> bool:
    if isinstance(e, Deriv):
        return True
    if isinstance(e, (Add, Mul)):
        return any(contains_deriv(a) for a in e.args)
    if isinstance(e, Pow):
        return contains_deriv(e.base) or contains_deriv(e.exponent)
    if isinstance(e, Fn):
        return contains_deriv(e.arg)
    return False


def is_zero_expr(e: Expr) -> bool:
    return isinstance(e, Const) and e.value.is_zero


# ---------------------------------------------------------------------------
# calculus


def differentiate(e: Expr, var: str, dependent: frozenset = frozenset()) -> Expr:
    """Exact symbolic derivative d/d var.

    Symbols listed in `dependent` are treated as unknown functions of `var`;
    their derivatives stay as derivative markers.
    """
    if isinstance(e, Const):
        return ZERO_E
    if isinstance(e, Sym):
        if e.name == var:
            return ONE_E
        if e.name in dependent:
            return Deriv(e, ((var, 1),))
        return ZERO_E
    if isinstance(e, Add):
        return add(*(differentiate(a, var, dependent) for a in e.args))
    if isinstance(e, Mul):
        terms = []
        for idx, a in enumerate(e.args):
            da = differentiate(a, var, dependent)
            if is_zero_expr(da):
                continue
            rest = e.args[:idx] + e.args[idx + 1 :]
            terms.append(mul(da, *rest))
        return add(*terms) if terms else ZERO_E
    if isinstance(e, Pow):
        exp_free = free_symbols(e.exponent)
        if var in exp_free or (exp_free & dependent):
            raise DerivativeError(
                f"cannot differentiate {render(e)} with respect to {var}: "
                "exponent depends on the variable"
            )
        db = differentiate(e.base, var, dependent)
        if is_zero_expr(db):
            return ZERO_E
        return mul(e.exponent, pow_(e.base, add(e.exponent, MINUS_ONE)), db)
    if isinstance(e, Fn):
        dw = differentiate(e.arg, var, dependent)
        if is_zero_expr(dw):
            return ZERO_E
        w = e.arg
        if e.name == "tan":
            outer = add(ONE_E, pow_(Fn("tan", w), const(2)))
        elif e.name == "cot":
            outer = mul(MINUS_ONE, add(ONE_E, pow_(Fn("cot", w), const(2))))
        elif e.name == "tanh":
            outer = add(ONE_E, mul(MINUS_ONE, pow_(Fn("tanh", w), const(2))))
        elif e.name == "coth":
            outer = add(ONE_E, mul(MINUS_ONE, pow_(Fn("coth", w), const(2))))
        elif e.name == "sqrt":
            outer = mul(HALF, pow_(fn("sqrt", w), MINUS_ONE))
        else:  # pragma: no cover - guarded by FUNCTION_NAMES
            raise DerivativeError(f"no derivative rule for {e.name}")
        return mul(outer, dw)
    if isinstance(e, Deriv):
        inner_free = free_symbols(e.inner)
        if var in inner_free or (inner_free & dependent):
            return deriv(e, ((var, 1),))
        return ZERO_E
    raise TypeError(type(e))


def substitute(e: Expr, bindings: dict) -> Expr:
    """Simultaneous substitution of symbols; result is re-canonicalized."""
    if not bindings:
        return e
    norm = {k: _lift(v) for k, v in bindings.items()}

    def walk(node):
        if isinstance(node, Const):
            return node
        if isinstance(node, Sym):
            return norm.get(node.name, node)
        if isinstance(node, Add):
            return add(*(walk(a) for a in node.args))
        if isinstance(node, Mul):
            return mul(*(walk(a) for a in node.args))
        if isinstance(node, Pow):
            return pow_(walk(node.base), walk(node.exponent))
        if isinstance(node, Fn):
            return fn(node.name, walk(node.arg))
        if isinstance(node, Deriv):
            for v, _ in node.orders:
                if v in norm:
                    raise DerivativeError(
                        f"cannot substitute differentiation variable {v!r}"
                    )
            return deriv(walk(node.inner), node.orders)
        raise TypeError(type(node))

    return walk(e)


def replace_nodes(e: Expr, mapping: dict) -> Expr:
    """Replace whole canonical subtrees (checked before descending)."""
    if not mapping:
        return e

    def walk(node):
        hit = mapping.get(node)
        if hit is not None:
            return hit
        if isinstance(node, (Const, Sym)):
            return node
        if isinstance(node, Add):
            return add(*(walk(a) for a in node.args))
        if isinstance(node, Mul):
            return mul(*(walk(a) for a in node.args))
        if isinstance(node, Pow):
            return pow_(walk(node.base), walk(node.exponent))
        if isinstance(node, Fn):
            return fn(node.name, walk(node.arg))
        if isinstance(node, Deriv):
            return deriv(walk(node.inner), node.orders)
        raise TypeError(type(node))

    return walk(e)


def expand_derivatives(e: Expr, dependent: frozenset = frozenset()) -> Expr:
    """Carry out derivative markers whose inner part is composite.

    Markers over a bare symbol from `dependent` are kept (they are the
    atoms U', U'', ... of a reduced equation); everything else is expanded
    with the chain/product/power rules.  With an empty `dependent` set every
    marker is fully expanded.
    """

    def walk(node):
        if isinstance(node, (Const, Sym)):
            return node
        if isinstance(node, Add):
            return add(*(walk(a) for a in node.args))
        if isinstance(node, Mul):
            return mul(*(walk(a) for a in node.args))
        if isinstance(node, Pow):
            return pow_(walk(node.base), walk(node.exponent))
        if isinstance(node, Fn):
            return fn(node.name, walk(node.arg))
        if isinstance(node, Deriv):
            inner = walk(node.inner)
            if isinstance(inner, Sym) and inner.name in dependent:
                return deriv(inner, node.orders)
            out = inner
            for v, k in node.orders:
                for _ in range(k):
                    out = differentiate(out, v, dependent)
                    out = walk(out)
            return out
        raise TypeError(type(node))

    return walk(e)


# ---------------------------------------------------------------------------
# numeric evaluation


def eval_complex(e: Expr, bindings: dict, pole_tol: float = POLE_GUARD) -> complex:
    """IEEE double-complex evaluation; principal branch for sqrt and powers.

    Raises PoleError when a trigonometric/hyperbolic denominator (or the base
    of a negative power) falls below `pole_tol` in magnitude.
    """
    if isinstance(e, Const):
        return e.value.to_complex()
    if isinstance(e, Sym):
        try:
            return complex(bindings[e.name])
        except KeyError:
            raise EvalError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Add):
        total = 0j
        for a in e.args:
            total += eval_complex(a, bindings, pole_tol)
        return total
    if isinstance(e, Mul):
        total = 1 + 0j
        for a in e.args:
            total *= eval_complex(a, bindings, pole_tol)
        return total
    if isinstance(e, Pow):
        b = eval_complex(e.base, bindings, pole_tol)
        if isinstance(e.exponent, Const) and e.exponent.value.is_integer:
            k = int(e.exponent.value.re)
            if k < 0 and abs(b) < pole_tol:
                raise PoleError("negative power of a near-zero base")
            try:
                return b**k
            except OverflowError as exc:
                raise EvalError(str(exc)) from None
        x = eval_complex(e.exponent, bindings, pole_tol)
        if abs(b) < pole_tol and (x.real < 0 or x.imag != 0):
            raise PoleError("near-zero base with non-positive exponent")
        try:
            return b**x
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise EvalError(str(exc)) from None
    if isinstance(e, Fn):
        a = eval_complex(e.arg, bindings, pole_tol)
        try:
            if e.name == "tan":
                d = cmath.cos(a)
                if abs(d) < pole_tol:
                    raise PoleError("tan pole")
                return cmath.sin(a) / d
            if e.name == "cot":
                d = cmath.sin(a)
                if abs(d) < pole_tol:
                    raise PoleError("cot pole")
                return cmath.cos(a) / d
            if e.name == "tanh":
                d = cmath.cosh(a)
                if abs(d) < pole_tol:
                    raise PoleError("tanh pole")
                return cmath.sinh(a) / d
            if e.name == "coth":
                d = cmath.sinh(a)
                if abs(d) < pole_tol:
                    raise PoleError("coth pole")
                return cmath.cosh(a) / d
            if e.name == "sqrt":
                return cmath.sqrt(a)
        except OverflowError as exc:
            raise EvalError(str(exc)) from None
        raise EvalError(f"unknown function {e.name}")  # pragma: no cover
    if isinstance(e, Deriv):
        raise EvalError("cannot evaluate an unexpanded derivative marker")
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# rendering

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _render(e: Expr):
    """Return (text, precedence)."""
    if isinstance(e, Const):
        text = e.value.render()
        if text.startswith("("):
            return text[1:-1], _PREC_ADD
        if text.startswith("-"):
            return text, _PREC_NEG
        if "/" in text or "*" in text:
            return text, _PREC_MUL
        return text, _PREC_ATOM
    if isinstance(e, Sym):
        return e.name, _PREC_ATOM
    if isinstance(e, Add):
        parts = []
        for idx, a in enumerate(e.args):
            t, p = _render(a)
            if p < _PREC_ADD:  # pragma: no cover - nothing binds looser
                t = f"({t})"
            if idx == 0:
                parts.append(t)
            elif t.startswith("-"):
                parts.append(f" - {t[1:]}")
            else:
                parts.append(f" + {t}")
        return "".join(parts), _PREC_ADD
    if isinstance(e, Mul):
        args = list(e.args)
        prefix = ""
        if isinstance(args[0], Const) and args[0].value == GaussianRational(-1):
            prefix = "-"
            args = args[1:]
            if not args:
                return "-1", _PREC_NEG
        parts = []
        for a in args:
            t, p = _render(a)
            if p < _PREC_MUL or (parts == [] and prefix == "" and False):
                t = f"({t})"
            parts.append(t)
        text = prefix + "*".join(parts)
        return text, _PREC_NEG if prefix else _PREC_MUL
    if isinstance(e, Pow):
        bt, bp = _render(e.base)
        if bp < _PREC_ATOM:
            bt = f"({bt})"
        et, ep = _render(e.exponent)
        if ep < _PREC_ATOM:
            et = f"({et})"
        return f"{bt}^{et}", _PREC_POW
    if isinstance(e, Fn):
        t, _ = _render(e.arg)
        return f"{e.name}({t})", _PREC_ATOM
    if isinstance(e, Deriv):
        t, _ = _render(e.inner)
        vars_part = ",".join(v for v, k in e.orders for _ in range(k))
        return f"D({t},{vars_part})", _PREC_ATOM
    raise TypeError(type(e))


def render(e: Expr) -> str:
    """Text in the expression grammar; parse_expr(render(e)) == e."""
    return _render(e)[0]


_PRETTY = (("sqrt", "√"), ("phi", "φ"), ("lambda", "λ"),
           ("alpha", "α"), ("beta", "β"))


def pretty(e: Expr) -> str:
    """Presentation text (unicode radicals and greek letters)."""
    import re as _re

    text = render(e)
    for word, glyph in _PRETTY:
        text = _re.sub(rf"\b{word}\b", glyph, text)
    return text
