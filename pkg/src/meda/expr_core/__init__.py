"""Exact symbolic expression substrate: numbers, trees, parsing, and
polynomial normal forms."""

from .gaussian import GaussianRational
from .nodes import (
    Add,
    Const,
    Deriv,
    Expr,
    Fn,
    FUNCTION_NAMES,
    Mul,
    POLE_GUARD,
    Pow,
    Sym,
    add,
    const,
    contains_deriv,
    deriv,
    differentiate,
    eval_complex,
    expand_derivatives,
    fn,
    free_symbols,
    is_zero_expr,
    mul,
    pow_,
    pretty,
    render,
    replace_nodes,
    substitute,
    sym,
)
from .parser import parse_expr
from .poly import (
    AtomTable,
    Poly,
    PolyForm,
    cleared_numerator,
    expand_normalize,
    expr_to_ratfun,
    exprs_equal,
    poly_zero_check,
    reduce_radicals,
)

__all__ = [
    "GaussianRational",
    "Expr",
    "Const",
    "Sym",
    "Add",
    "Mul",
    "Pow",
    "Fn",
    "Deriv",
    "FUNCTION_NAMES",
    "POLE_GUARD",
    "add",
    "mul",
    "pow_",
    "fn",
    "deriv",
    "const",
    "sym",
    "render",
    "pretty",
    "substitute",
    "replace_nodes",
    "differentiate",
    "expand_derivatives",
    "eval_complex",
    "free_symbols",
    "contains_deriv",
    "is_zero_expr",
    "parse_expr",
    "Poly",
    "PolyForm",
    "AtomTable",
    "expr_to_ratfun",
    "expand_normalize",
    "poly_zero_check",
    "cleared_numerator",
    "reduce_radicals",
    "exprs_equal",
]
