"""Numeric ground truth: residuals of closed-form solutions on sampling
grids, independent of the expansion machinery.

ODE residuals substitute a profile into the reduced equation and evaluate on
complex z samples.  PDE residuals substitute u(x,t) (and v for systems) into
the original equations, differentiate symbolically in x and t, evaluate on a
grid, and cross-check a few points against central finite differences so a
differentiation bug cannot silently vouch for itself.  Points whose
pole-guard triggers are skipped and counted, never interpolated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import CrossCheckError, EvalError, PoleError, ResidualError
from .expr_core import (
    Deriv,
    Expr,
    Sym,
    differentiate,
    eval_complex,
    expand_derivatives,
    free_symbols,
    render,
    replace_nodes,
    substitute,
    sym,
)
from .pde_frontend import PDEProblem, TravelingWaveODE, WAVE_VARIABLE
from .solution_builder import ClosedFormSolution

#: finite-difference step for first-order cross-checks
FD_STEP = 1e-5
#: required relative agreement between symbolic and FD residuals
FD_RTOL = 1e-4


@dataclass
class GridSpec:
    x0: float = -2.0
    x1: float = 2.0
    nx: int = 21
    t0: float = 0.0
    t1: float = 1.0
    nt: int = 11

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        try:
            x_part, t_part = text.split(",")
            x0, x1, nx = x_part.split(":")
            t0, t1, nt = t_part.split(":")
            return cls(float(x0), float(x1), int(nx), float(t0), float(t1), int(nt))
        except ValueError:
            raise ResidualError(
                f"bad grid spec {text!r}; expected 'x0:x1:nx,t0:t1:nt'"
            ) from None

    def points(self):
        for ix in range(self.nx):
            x = self.x0 + (self.x1 - self.x0) * ix / max(1, self.nx - 1)
            for it in range(self.nt):
                t = self.t0 + (self.t1 - self.t0) * it / max(1, self.nt - 1)
                yield x, t

    @property
    def total(self) -> int:
        return self.nx * self.nt

    def to_json_dict(self) -> dict:
        return {
            "x": [self.x0, self.x1, self.nx],
            "t": [self.t0, self.t1, self.nt],
        }


@dataclass
class EquationResidual:
    max: float = 0.0
    mean: float = 0.0
    worst_point: tuple | None = None
    evaluated: int = 0
    skipped: int = 0

    def to_json_dict(self) -> dict:
        worst = None
        if self.worst_point is not None:
            worst = [
                [v.real, v.imag] if isinstance(v, complex) else v
                for v in self.worst_point
            ]
        return {
            "max": self.max,
            "mean": self.mean,
            "worst_point": worst,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
        }


@dataclass
class ResidualReport:
    grid: GridSpec | None
    evaluated: int
    skipped: int
    per_equation: list[EquationResidual] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max((eq.max for eq in self.per_equation), default=0.0)

    def to_json_dict(self) -> dict:
        return {
            "grid": self.grid.to_json_dict() if self.grid else None,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "per_equation": [eq.to_json_dict() for eq in self.per_equation],
        }


def _accumulate(values):
    """Reduce (point, |residual|) pairs into an EquationResidual."""
    acc = EquationResidual()
    total = 0.0
    for point, magnitude in values:
        acc.evaluated += 1
        total += magnitude
        if acc.worst_point is None or magnitude > acc.max:
            acc.max = magnitude
            acc.worst_point = point
    if acc.evaluated:
        acc.mean = total / acc.evaluated
    return acc


def _scaled_residual(expr: Expr, bindings: dict) -> float:
    """|equation value| divided by the largest additive term magnitude
    (floor 1).  Keeps the residual of an exact solution near machine epsilon
    even where Laurent tails make individual terms huge, without hiding a
    genuinely nonzero residual."""
    from .expr_core import Add

    if isinstance(expr, Add):
        values = [eval_complex(a, bindings) for a in expr.args]
        total = sum(values)
        scale = max(abs(v) for v in values)
    else:
        total = eval_complex(expr, bindings)
        scale = abs(total)
    return abs(total) / max(1.0, scale)


# ---------------------------------------------------------------------------
# ODE residuals


def ode_residual(
    ode: TravelingWaveODE,
    solution_z,
    z_samples,
    param_bindings: dict | None = None,
) -> ResidualReport:
    """Residuals of profile(s) of z substituted into the reduced equations.

    `solution_z` is one expression for single-profile ODEs or a mapping
    profile name -> expression.
    """
    param_bindings = dict(param_bindings or {})
    z_samples = list(z_samples)
    if isinstance(solution_z, Expr):
        if len(ode.profiles) != 1:
            raise ResidualError("a single expression needs a single-profile ODE")
        solutions = {ode.profiles[0]: solution_z}
    else:
        solutions = dict(solution_z)
        missing = set(ode.profiles) - set(solutions)
        if missing:
            raise ResidualError(f"missing profile solutions: {sorted(missing)}")

    residual_exprs = []
    for eq in ode.equations:
        expanded = expand_derivatives(eq, dependent=frozenset(ode.profiles))
        mapping = {}
        for prof, sol in solutions.items():
            mapping[Sym(prof)] = sol
            d = sol
            for k in range(1, 1 + _max_marker_order(expanded, prof)):
                d = differentiate(d, WAVE_VARIABLE)
                mapping[Deriv(Sym(prof), ((WAVE_VARIABLE, k),))] = d
        residual = replace_nodes(expanded, mapping)
        unbound = free_symbols(residual) - set(param_bindings) - {WAVE_VARIABLE}
        if unbound:
            raise ResidualError(f"unbound symbols in residual: {sorted(unbound)}")
        residual_exprs.append(residual)

    per_eq = []
    point_status = [True] * len(z_samples)
    for expr in residual_exprs:
        values = []
        for idx, z0 in enumerate(z_samples):
            bind = dict(param_bindings)
            bind[WAVE_VARIABLE] = complex(z0)
            try:
                magnitude = _scaled_residual(expr, bind)
            except PoleError:
                point_status[idx] = False
                continue
            except EvalError as exc:
                raise ResidualError(str(exc)) from None
            values.append(((complex(z0),), magnitude))
        acc = _accumulate(values)
        acc.skipped = len(z_samples) - acc.evaluated
        per_eq.append(acc)
    evaluated_all = sum(point_status)
    skipped_any = len(point_status) - evaluated_all
    if all(eq.evaluated == 0 for eq in per_eq):
        raise ResidualError("every sample point hit a pole guard")
    return ResidualReport(
        grid=None,
        evaluated=evaluated_all,
        skipped=skipped_any,
        per_equation=per_eq,
    )


def _max_marker_order(e: Expr, profile: str) -> int:
    from .pde_frontend import expand_to_terms

    out = 0
    for term in expand_to_terms(e):
        for atom in term.atom_powers:
            if isinstance(atom, Deriv) and isinstance(atom.inner, Sym):
                if atom.inner.name == profile:
                    out = max(out, atom.total_order)
    return out


# ---------------------------------------------------------------------------
# PDE residuals


def pde_residual(
    problem: PDEProblem,
    solution: ClosedFormSolution,
    grid: GridSpec | None = None,
    param_bindings: dict | None = None,
    fd_points: int = 5,
    fd_seed: int = 0,
) -> ResidualReport:
    """Residuals of a closed-form solution on an (x, t) grid, with a
    finite-difference cross-check of the symbolic derivatives."""
    grid = grid or GridSpec()
    param_bindings = dict(param_bindings or {})

    missing = set(problem.unknowns) - set(solution.expressions)
    if missing:
        raise ResidualError(f"solution lacks unknowns: {sorted(missing)}")

    substituted_eqs = []
    symbolic_eqs = []
    for eq in problem.equations:
        with_solutions = substitute(eq, solution.expressions)
        substituted_eqs.append(with_solutions)
        symbolic_eqs.append(expand_derivatives(with_solutions))

    for e in symbolic_eqs:
        unbound = free_symbols(e) - set(param_bindings) - set(problem.variables)
        if unbound:
            raise ResidualError(f"unbound symbols in residual: {sorted(unbound)}")

    per_eq = []
    all_ok: dict = {}
    for expr in symbolic_eqs:
        values = []
        skipped = 0
        for x, t in grid.points():
            bind = dict(param_bindings)
            bind["x"] = x
            bind["t"] = t
            try:
                magnitude = _scaled_residual(expr, bind)
            except PoleError:
                skipped += 1
                all_ok[(x, t)] = False
                continue
            except EvalError as exc:
                raise ResidualError(str(exc)) from None
            all_ok.setdefault((x, t), True)
            values.append(((x, t), magnitude))
        acc = _accumulate(values)
        acc.skipped = skipped
        per_eq.append(acc)
    if all(eq.evaluated == 0 for eq in per_eq):
        raise ResidualError("every grid point hit a pole guard")

    good_points = [p for p, ok in all_ok.items() if ok]
    _cross_check(
        substituted_eqs,
        symbolic_eqs,
        good_points,
        param_bindings,
        fd_points,
        fd_seed,
    )

    evaluated = sum(1 for ok in all_ok.values() if ok)
    return ResidualReport(
        grid=grid,
        evaluated=evaluated,
        skipped=grid.total - evaluated,
        per_equation=per_eq,
    )


def _cross_check(
    substituted_eqs, symbolic_eqs, points, param_bindings, fd_points, fd_seed
):
    """Compare symbolic residuals with finite-difference residuals.

    Disagreement signals a differentiation bug, not a solution failure.
    First-order markers use the documented 1e-5 step; higher orders use a
    larger step scaled as eps^(1/(k+2)) so double-precision cancellation
    stays below the agreement tolerance.
    """
    if not points:
        return
    rng = random.Random(fd_seed)
    sample = points if len(points) <= fd_points else rng.sample(points, fd_points)
    for original, symbolic in zip(substituted_eqs, symbolic_eqs):
        for x, t in sample:
            bind = dict(param_bindings)
            bind["x"] = x
            bind["t"] = t
            try:
                sym_val = eval_complex(symbolic, bind)
                fd_val = _eval_with_fd(original, bind)
            except (PoleError, EvalError):
                continue
            scale = max(1.0, abs(sym_val), abs(fd_val))
            if abs(sym_val - fd_val) > FD_RTOL * scale:
                raise CrossCheckError(
                    f"finite differences disagree with symbolic derivatives at "
                    f"(x={x:g}, t={t:g}): {sym_val} vs {fd_val}"
                )


def _fd_step(order: int) -> float:
    if order <= 1:
        return FD_STEP
    return max(FD_STEP, 2.2e-16 ** (1.0 / (order + 2)))


def _central_difference(f, value, order, h):
    if order == 0:
        return f(value)
    if order == 1:
        return (f(value + h) - f(value - h)) / (2 * h)
    if order == 2:
        return (f(value + h) - 2 * f(value) + f(value - h)) / h**2
    if order == 3:
        return (
            f(value + 2 * h) - 2 * f(value + h) + 2 * f(value - h) - f(value - 2 * h)
        ) / (2 * h**3)
    # central stencil by recursion for higher orders
    g = lambda v: _central_difference(f, v, order - 2, h)
    return (g(value + h) - 2 * g(value) + g(value - h)) / h**2


def _eval_with_fd(e: Expr, bindings: dict) -> complex:
    """Evaluate with derivative markers computed by central differences."""
    from .expr_core import Add, Const, Fn, Mul, Pow

    if isinstance(e, Deriv):
        orders = dict(e.orders)
        h = _fd_step(sum(orders.values()))

        def eval_at(shifts: dict) -> complex:
            bind = dict(bindings)
            for var, dv in shifts.items():
                bind[var] = bind[var] + dv
            return eval_complex(e.inner, bind)

        def nested(vars_left, shifts):
            if not vars_left:
                return eval_at(shifts)
            var, order = vars_left[0]

            def f(delta):
                return nested(vars_left[1:], {**shifts, var: delta})

            return _central_difference(f, shifts.get(var, 0.0), order, h)

        # seed shifts at zero for each variable
        todo = list(orders.items())
        return nested(todo, {v: 0.0 for v, _ in todo})
    if isinstance(e, Const):
        return e.value.to_complex()
    if isinstance(e, Sym):
        return complex(bindings[e.name])
    if isinstance(e, Add):
        return sum(_eval_with_fd(a, bindings) for a in e.args)
    if isinstance(e, Mul):
        out = 1 + 0j
        for a in e.args:
            out *= _eval_with_fd(a, bindings)
        return out
    if isinstance(e, Pow):
        return eval_complex(e, bindings) if not _has_marker(e) else _pow_fd(e, bindings)
    if isinstance(e, Fn):
        return eval_complex(e, bindings)
    raise TypeError(type(e))


def _has_marker(e: Expr) -> bool:
    from .expr_core import contains_deriv

    return contains_deriv(e)


def _pow_fd(e, bindings):
    base = _eval_with_fd(e.base, bindings)
    exp = _eval_with_fd(e.exponent, bindings)
    return base**exp
