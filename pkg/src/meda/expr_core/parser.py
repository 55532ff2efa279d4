"""Recursive-descent parser for the expression grammar.

Grammar: identifiers ``[a-zA-Z][a-zA-Z0-9_]*``; binary ``+ - * / ^`` with the
usual precedence (``^`` binds tightest and is right-associative); unary
minus; ``i`` is the imaginary unit; ``D(expr, v1, v2, ...)`` marks partial
derivatives (repeat a variable for higher order); functions tan, cot, tanh,
coth, sqrt; parentheses; integer literals.
"""

from __future__ import annotations

from fractions import Fraction

from ..errors import ExprParseError, UndeclaredSymbolError
from .nodes import (
    Expr,
    FUNCTION_NAMES,
    MINUS_ONE,
    add,
    const,
    deriv,
    fn,
    mul,
    pow_,
    sym,
)
from .gaussian import GaussianRational

_RESERVED = set(FUNCTION_NAMES) | {"i", "D"}


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^(),":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ExprParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, symbols):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.symbols = None if symbols is None else set(symbols)

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExprParseError(
                f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.pos
            )
        return self.advance()

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> Expr:
        terms = [self.parse_term()]
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            rhs = self.parse_term()
            terms.append(rhs if op.kind == "+" else mul(MINUS_ONE, rhs))
        return add(*terms)

    # term := unary (('*'|'/') unary)*
    def parse_term(self) -> Expr:
        factors = [self.parse_unary()]
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            rhs = self.parse_unary()
            factors.append(rhs if op.kind == "*" else pow_(rhs, MINUS_ONE))
        return mul(*factors)

    # unary := '-' unary | power
    def parse_unary(self) -> Expr:
        if self.peek().kind == "-":
            self.advance()
            return mul(MINUS_ONE, self.parse_unary())
        return self.parse_power()

    # power := atom ('^' unary)?   (right-assoc; exponent may be signed)
    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "^":
            self.advance()
            return pow_(base, self.parse_unary())
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return const(Fraction(int(tok.text)))
        if tok.kind == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name == "i":
                return const(GaussianRational(0, 1))
            if name == "D" and self.peek().kind == "(":
                return self.parse_deriv(tok)
            if name in FUNCTION_NAMES:
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return fn(name, arg)
            if self.symbols is not None and name not in self.symbols:
                raise UndeclaredSymbolError(f"undeclared identifier {name!r}", tok.pos)
            return sym(name)
        raise ExprParseError(
            f"unexpected token {tok.text or 'end of input'!r}", tok.pos
        )

    def parse_deriv(self, tok: _Token) -> Expr:
        self.expect("(")
        inner = self.parse_expr()
        orders: dict = {}
        saw_var = False
        while self.peek().kind == ",":
            self.advance()
            var_tok = self.expect("ident")
            name = var_tok.text
            if name in _RESERVED:
                raise ExprParseError(
                    f"{name!r} cannot be a differentiation variable", var_tok.pos
                )
            if self.symbols is not None and name not in self.symbols:
                raise UndeclaredSymbolError(
                    f"undeclared identifier {name!r}", var_tok.pos
                )
            orders[name] = orders.get(name, 0) + 1
            saw_var = True
        self.expect(")")
        if not saw_var:
            raise ExprParseError("D(...) needs at least one variable", tok.pos)
        return deriv(inner, tuple(sorted(orders.items())))


def parse_expr(text: str, symbols=None) -> Expr:
    """Parse `text` to a canonical Expr.

    `symbols` is the declared symbol set; identifiers outside it raise
    UndeclaredSymbolError.  Pass None to accept any identifier.
    """
    parser = _Parser(text, symbols)
    result = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "end":
        raise ExprParseError(f"trailing input {tok.text!r}", tok.pos)
    return result
