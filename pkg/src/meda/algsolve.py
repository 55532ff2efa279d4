"""Candidate bindings for the extracted algebraic system: exact symbolic
verification, and numeric root families by multistart Gauss-Newton at
instantiated parameters.

Symbolic verification substitutes each binding as an exact rational function
(radicals allowed; their squares reduce by s^2 = argument), clears
denominators, and demands the zero polynomial per equation.  Numeric solving
replaces the closed-form step a computer algebra system would perform: it
instantiates the parameters, runs damped Gauss-Newton from many random
complex starts, re-checks every converged root independently, deduplicates,
and returns a deterministically ordered list.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CandidateError, SolveError
from .expr_core import (
    AtomTable,
    Const,
    Expr,
    GaussianRational,
    Poly,
    eval_complex,
    expr_to_ratfun,
    free_symbols,
    parse_expr,
    reduce_radicals,
    render,
    substitute,
)
from .meda_engine import AlgebraicSystem

_ROUND_DIGITS = 8


@dataclass
class Candidate:
    bindings: dict
    arbitrary: tuple = ()
    abbreviations: dict = field(default_factory=dict)
    source: str = "unspecified"
    verified: bool = False

    def binding_expr(self, name: str) -> Expr:
        value = self.bindings[name]
        if isinstance(value, Expr):
            return value
        return Const(GaussianRational.from_value(value))

    def numeric_bindings(self) -> dict:
        out = {}
        for name, value in self.bindings.items():
            if isinstance(value, Expr):
                out[name] = eval_complex(value, {})
            else:
                out[name] = complex(value)
        return out


@dataclass
class CandidateFile:
    """A candidate fixture plus its pipeline metadata."""

    candidate: Candidate
    problem: str | None = None
    pipeline: tuple = ()
    transform: str | None = None
    instantiations: list = field(default_factory=list)
    note: str | None = None
    expected: str | None = None
    path: str | None = None


def load_candidate(path) -> CandidateFile:
    """Parse a candidate fixture file.

    Lines: `source:`, `problem:`, `pipeline:`, `transform:`, `arbitrary:`,
    `abbrev NAME = expr`, `NAME = expr` bindings, repeatable `params:` numeric
    instantiations, `note:`, `expected:`.  Abbreviations are expanded into
    the binding right-hand sides in file order.
    """
    path = Path(path)
    source = path.stem
    problem = None
    pipeline: tuple = ()
    transform = None
    arbitrary: list[str] = []
    abbrevs: dict = {}
    bindings: dict = {}
    instantiations = []
    note = None
    expected = None

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        def fail(msg):
            raise CandidateError(f"{path}:{lineno}: {msg}")

        if line.startswith("source:"):
            source = line.split(":", 1)[1].strip()
        elif line.startswith("problem:"):
            problem = line.split(":", 1)[1].strip()
        elif line.startswith("pipeline:"):
            pipeline = tuple(
                p.strip() for p in line.split(":", 1)[1].split(",") if p.strip()
            )
        elif line.startswith("transform:"):
            transform = line.split(":", 1)[1].strip()
        elif line.startswith("arbitrary:"):
            arbitrary += [s.strip() for s in line.split(":", 1)[1].split(",") if s.strip()]
        elif line.startswith("params:"):
            body = line.split(":", 1)[1].strip()
            inst = {}
            for item in body.split(","):
                if not item.strip():
                    continue
                if "=" not in item:
                    fail(f"bad params entry {item!r}")
                k, v = item.split("=", 1)
                try:
                    inst[k.strip()] = complex(v.strip())
                except ValueError:
                    fail(f"bad numeric value {v.strip()!r}")
            instantiations.append(inst)
        elif line.startswith("note:"):
            note = line.split(":", 1)[1].strip()
        elif line.startswith("expected:"):
            expected = line.split(":", 1)[1].strip()
        elif line.startswith("abbrev "):
            body = line[len("abbrev ") :]
            if "=" not in body:
                fail("abbrev needs `NAME = expr`")
            name, rhs = body.split("=", 1)
            name = name.strip()
            try:
                expr = parse_expr(rhs.strip())
            except Exception as exc:
                fail(f"bad abbrev expression: {exc}")
            abbrevs[name] = substitute(expr, abbrevs)
        elif "=" in line:
            name, rhs = line.split("=", 1)
            name = name.strip()
            if not name.isidentifier():
                fail(f"bad binding name {name!r}")
            try:
                expr = parse_expr(rhs.strip())
            except Exception as exc:
                fail(f"bad binding expression: {exc}")
            bindings[name] = substitute(expr, abbrevs)
        else:
            fail(f"unrecognized line {line!r}")

    candidate = Candidate(
        bindings=bindings,
        arbitrary=tuple(arbitrary),
        abbreviations=abbrevs,
        source=source,
    )
    return CandidateFile(
        candidate=candidate,
        problem=problem,
        pipeline=pipeline,
        transform=transform,
        instantiations=instantiations,
        note=note,
        expected=expected,
        path=str(path),
    )


# ---------------------------------------------------------------------------
# exact verification


@dataclass
class EquationStatus:
    source_power: int
    is_zero: bool
    residual: str | None = None


@dataclass
class VerificationReport:
    statuses: list[EquationStatus]
    passed: bool
    notes: list[str] = field(default_factory=list)

    def failing_powers(self) -> list[int]:
        return [s.source_power for s in self.statuses if not s.is_zero]

    def render_lines(self) -> list[str]:
        lines = []
        for s in self.statuses:
            if s.is_zero:
                lines.append(f"phi^{s.source_power}: zero")
            else:
                lines.append(f"phi^{s.source_power}: NONZERO  {s.residual}")
        lines.append("PASS" if self.passed else "FAIL")
        return lines


def verify_candidate(system: AlgebraicSystem, cand: Candidate) -> VerificationReport:
    """Exact, parameter-symbolic check that a candidate zeroes every
    equation.  Marks the candidate verified on success."""
    unknowns = set(system.unknowns)
    bound = set(cand.bindings)
    arbitrary = set(cand.arbitrary)
    missing = unknowns - bound - arbitrary
    if missing:
        raise CandidateError(
            f"candidate leaves unknowns unbound: {sorted(missing)}"
        )
    doubly = bound & arbitrary
    if doubly:
        raise CandidateError(f"bound symbols also declared arbitrary: {sorted(doubly)}")
    allowed_rhs = set(system.parameters) | arbitrary
    for name in system.unknowns:
        if name not in cand.bindings:
            continue
        rhs = cand.binding_expr(name)
        bad = free_symbols(rhs) - allowed_rhs
        if bad:
            raise CandidateError(
                f"binding {name} references undeclared symbols {sorted(bad)}"
            )

    table = AtomTable()
    ratfun_bindings = {}
    for name in system.unknowns:
        if name in cand.bindings:
            num, den, _ = expr_to_ratfun(cand.binding_expr(name), table=table)
            ratfun_bindings[name] = (num, den)

    statuses = []
    passed = True
    for eq in system.equations:
        num, den = _substitute_ratfuns(eq.poly, ratfun_bindings)
        num, den = reduce_radicals(num, den, table)
        if den.is_zero:
            raise CandidateError(
                f"identically-zero denominator after substitution in phi^{eq.source_power}"
            )
        if num.is_zero:
            statuses.append(EquationStatus(eq.source_power, True))
        else:
            passed = False
            statuses.append(
                EquationStatus(
                    eq.source_power, False, residual=num.compact().render(table.exprs)
                )
            )
    report = VerificationReport(statuses=statuses, passed=passed)
    if passed:
        cand.verified = True
    return report


def _substitute_ratfuns(poly: Poly, bindings: dict) -> tuple[Poly, Poly]:
    """Substitute (num, den) pairs for symbols, one at a time."""
    num = poly
    den = Poly.constant(1)
    for name, (bn, bd) in bindings.items():
        if num.is_zero or name not in num.symbols:
            continue
        groups = num.as_poly_in(name)
        top = max(groups)
        new = Poly()
        for k, coeff in groups.items():
            new = new + coeff * (bn**k) * (bd ** (top - k))
        num = new
        den = den * (bd**top)
    return num, den


# ---------------------------------------------------------------------------
# numeric root finding


@dataclass
class SolveConfig:
    starts: int = 200
    radius: float = 5.0
    tol: float = 1e-10
    dedup: float = 1e-6
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1 or self.max_iter < 1:
            raise SolveError("starts and max_iter must be positive")
        if min(self.radius, self.tol, self.dedup) <= 0:
            raise SolveError("radius, tol and dedup must be positive")


class _CompiledPoly:
    """Vectorized evaluation of one polynomial over batches of points."""

    __slots__ = ("exponents", "coefficients", "size")

    def __init__(self, poly: Poly, order: list[str]):
        idx = {s: i for i, s in enumerate(poly.symbols)}
        monos = sorted(poly.terms)
        self.size = len(order)
        self.exponents = np.array(
            [[mono[idx[s]] if s in idx else 0 for s in order] for mono in monos],
            dtype=np.int64,
        ).reshape(len(monos), len(order))
        self.coefficients = np.array(
            [poly.terms[m].to_complex() for m in monos], dtype=np.complex128
        )

    def eval(self, points: np.ndarray) -> np.ndarray:
        if self.coefficients.size == 0:
            return np.zeros(points.shape[0], dtype=np.complex128)
        powers = points[:, None, :] ** self.exponents[None, :, :]
        return powers.prod(axis=2) @ self.coefficients


def _monomial_content_divide(poly: Poly, symbols) -> Poly:
    """Divide out the largest monomial in `symbols` common to every term.

    Valid on strata where those symbols are declared nonzero; removes the
    all-zero super-attractor from the Newton landscape."""
    if poly.is_zero:
        return poly
    mins = {}
    for s in symbols:
        if s in poly.symbols:
            j = poly.symbols.index(s)
            low = min(mono[j] for mono in poly.terms)
            if low:
                mins[s] = low
    if not mins:
        return poly
    idx = {s: poly.symbols.index(s) for s in mins}
    terms = {}
    for mono, coeff in poly.terms.items():
        new = list(mono)
        for s, low in mins.items():
            new[idx[s]] -= low
        terms[tuple(new)] = coeff
    return Poly(poly.symbols, terms)


def _newton_batch(polys, unknowns, starts, tol, max_iter):
    """Batched Gauss-Newton with residual-proportional Levenberg damping.

    The damping vanishes with the residual, so roots of multiplicity two
    (which occur here) still converge to full accuracy."""
    compiled = [_CompiledPoly(p, unknowns) for p in polys]
    jacobian = [[_CompiledPoly(p.diff(u), unknowns) for u in unknowns] for p in polys]
    m, k = len(compiled), len(unknowns)

    def f_batch(points):
        return np.stack([c.eval(points) for c in compiled], axis=1)

    def j_batch(points):
        out = np.empty((points.shape[0], m, k), dtype=np.complex128)
        for i in range(m):
            for j in range(k):
                out[:, i, j] = jacobian[i][j].eval(points)
        return out

    x = starts.copy()
    eye = np.eye(k)[None, :, :]
    for _ in range(max_iter):
        F = f_batch(x)
        norms = np.abs(F).max(axis=1)
        finite = np.isfinite(norms)
        if not finite.any():
            break
        if (norms[finite] < tol * 1e-3).all():
            break
        J = j_batch(x)
        JH = J.conj().transpose(0, 2, 1)
        A = JH @ J
        scale = np.maximum(1.0, np.abs(A).max(axis=(1, 2)))
        lam = 1e-10 * scale * np.minimum(1.0, norms)
        A = A + (lam + 1e-30)[:, None, None] * eye
        rhs = (JH @ F[:, :, None])[:, :, 0]
        try:
            step = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.stack(
                [
                    np.linalg.lstsq(a, r, rcond=None)[0]
                    for a, r in zip(A, rhs)
                ]
            )
        # trust-region style step clipping keeps far starts from exploding
        size = np.abs(step).max(axis=1, keepdims=True)
        step = step * np.minimum(1.0, 10.0 / np.maximum(size, 1e-30))
        step[~np.isfinite(step)] = 0
        x = x - step
        bad = ~np.isfinite(x).all(axis=1)
        if bad.any():
            x[bad] = 0
    F = f_batch(x)
    norms = np.abs(F).max(axis=1)
    ok = np.isfinite(norms) & (norms < tol)
    return x[ok]


def _zero_patterns(coefficients):
    """All subsets of the expansion coefficients, smallest first."""
    from itertools import combinations

    out = []
    for r in range(len(coefficients) + 1):
        out.extend(combinations(coefficients, r))
    return out


def solve_numeric(
    system: AlgebraicSystem,
    param_bindings: dict,
    pinned: dict | None = None,
    config: SolveConfig | None = None,
) -> list[Candidate]:
    """Find numeric candidate roots of the instantiated system.

    All parameters (and any pinned unknowns) must be bound numerically; the
    remaining unknowns (at most 8) are solved by multistart damped
    Gauss-Newton.  The search is stratified over zero patterns of the
    expansion coefficients: within a stratum the surviving coefficients are
    declared nonzero, so their common monomial content can be divided out of
    each equation, which removes the all-zero attractor that otherwise
    captures nearly every start.  Unknowns absent from a stratum's equations
    are reported as exact zeros (the representative of a free direction).
    Every root is re-checked against the original instantiated system,
    deduplicated, and the list is sorted by rounded coordinates, so a fixed
    seed gives identical output.
    """
    pinned = dict(pinned or {})
    config = config or SolveConfig()

    missing = set(system.parameters) - set(param_bindings)
    if missing:
        raise SolveError(f"unbound parameters: {sorted(missing)}")
    bad_pins = set(pinned) - set(system.unknowns)
    if bad_pins:
        raise SolveError(f"pinned symbols are not unknowns: {sorted(bad_pins)}")
    unknowns = [u for u in system.unknowns if u not in pinned]
    if not unknowns:
        raise SolveError("nothing to solve: every unknown is pinned")
    if len(unknowns) > 8:
        raise SolveError(f"too many simultaneous unknowns ({len(unknowns)} > 8)")

    fixed = {}
    for k_, v in {**param_bindings, **pinned}.items():
        fixed[k_] = GaussianRational.from_value(complex(v))
    instantiated = [eq.poly.partial_eval(fixed) for eq in system.equations]
    instantiated = [p.compact() for p in instantiated]

    # independent residual re-check goes through the expression evaluator
    eq_exprs = [eq.poly.to_expr() for eq in system.equations]
    base_bindings = {k_: complex(v) for k_, v in {**param_bindings, **pinned}.items()}

    def full_residual(point: dict) -> float:
        worst = 0.0
        for expr in eq_exprs:
            worst = max(worst, abs(eval_complex(expr, {**base_bindings, **point})))
        return worst

    coeff_syms = [
        u for u in system.ansatz.coefficient_symbols if u in unknowns
    ]
    patterns = _zero_patterns(coeff_syms)
    per_stratum = max(8, config.starts // max(1, len(patterns)))

    rng = np.random.default_rng(config.seed)
    roots: list[tuple] = []

    for zeros in patterns:
        zero_binds = {z: GaussianRational(0) for z in zeros}
        reduced = [p.partial_eval(zero_binds).compact() for p in instantiated]
        reduced = [p for p in reduced if not p.is_zero]
        nonzero_coeffs = [u for u in coeff_syms if u not in zeros]
        cleaned = [_monomial_content_divide(p, nonzero_coeffs) for p in reduced]

        occurring: set = set()
        for p in cleaned:
            occurring |= set(p.used_symbols())
        stratum_unknowns = [u for u in unknowns if u not in zeros]
        solve_for = [u for u in stratum_unknowns if u in occurring]
        free = [u for u in stratum_unknowns if u not in occurring]

        if not cleaned or not solve_for:
            # whole stratum is a solution set (or empty); zero representative
            point = {u: 0j for u in unknowns}
            if full_residual(point) < config.tol:
                roots.append(tuple(point[u] for u in unknowns))
            continue

        k = len(solve_for)
        starts = (
            rng.uniform(-config.radius, config.radius, size=(per_stratum, k))
            + 1j * rng.uniform(-config.radius, config.radius, size=(per_stratum, k))
        ).astype(np.complex128)
        hits = _newton_batch(cleaned, solve_for, starts, config.tol, config.max_iter)
        for vec in hits:
            # the stratum declared these coefficients nonzero; points that
            # drifted onto a deeper stratum are that stratum's business
            point = {u: 0j for u in zeros}
            point.update({u: 0j for u in free})
            point.update({u: complex(v) for u, v in zip(solve_for, vec)})
            if any(
                abs(point[u]) < config.dedup for u in nonzero_coeffs
            ):
                continue
            if full_residual(point) < config.tol:
                roots.append(tuple(point[u] for u in unknowns))

    def sort_key(vec):
        return tuple(
            (round(v.real, _ROUND_DIGITS), round(v.imag, _ROUND_DIGITS)) for v in vec
        )

    roots.sort(key=sort_key)
    kept: list[tuple] = []
    for vec in roots:
        if any(
            max(abs(a - b) for a, b in zip(vec, other)) < config.dedup
            for other in kept
        ):
            continue
        kept.append(vec)

    candidates = []
    for vec in kept:
        bindings = {u: vec[j] for j, u in enumerate(unknowns)}
        bindings.update({k_: complex(v) for k_, v in pinned.items()})
        candidates.append(Candidate(bindings=bindings, source="solver"))
    return candidates


def candidate_to_json(cand: Candidate) -> dict:
    out = {"source": cand.source, "bindings": {}}
    for name in sorted(cand.bindings):
        value = cand.bindings[name]
        if isinstance(value, Expr):
            out["bindings"][name] = render(value)
        else:
            value = complex(value)
            out["bindings"][name] = [value.real, value.imag]
    if cand.arbitrary:
        out["arbitrary"] = sorted(cand.arbitrary)
    return out
