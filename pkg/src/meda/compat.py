"""Compatibility report: adjudicate shipped published-case fixtures.

Every row is computed, never hand-asserted: the candidate file's values are
substituted into the mechanically derived system for an exact pass/fail, and
passing cases additionally get a numeric ODE residual at each instantiation
recorded in the fixture.  The `expected:` line in a fixture documents the
outcome of an earlier run and is compared against the fresh result.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field
from pathlib import Path

from .algsolve import CandidateFile, load_candidate, verify_candidate
from .errors import MedaError
from .pde_frontend import parse_problem
from .pipeline import DerivedSystem, derive_system
from .solution_builder import assemble_solution
from .verify import ode_residual

DEFAULT_Z_SAMPLES = 100
RESIDUAL_TOLERANCE = 1e-8


def fixtures_root(override=None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get("MEDA_FIXTURES")
    if env:
        return Path(env)
    return Path(__file__).parent / "fixtures"


def problem_path(name: str, root: Path) -> Path:
    return root / f"{name}.meda"


def discover_cases(root: Path) -> list[Path]:
    cases_dir = root / "cases"
    if not cases_dir.is_dir():
        raise MedaError(f"no case fixture directory at {cases_dir}")
    found = sorted(cases_dir.glob("*.cand"))
    if not found:
        raise MedaError(f"no case fixtures in {cases_dir}")
    return found


@dataclass
class InstantiationResult:
    params: dict
    max_residual: float | None
    skipped: int = 0
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "params": {k: [v.real, v.imag] for k, v in self.params.items()},
            "max_residual": self.max_residual,
            "skipped": self.skipped,
            "error": self.error,
        }


@dataclass
class CaseResult:
    case: str
    problem: str
    symbolic_pass: bool
    failing_powers: list
    residuals: list[InstantiationResult] = field(default_factory=list)
    note: str | None = None
    expected: str | None = None

    @property
    def matches_expected(self) -> bool | None:
        if self.expected is None:
            return None
        return self.expected == ("pass" if self.symbolic_pass else "fail")

    @property
    def residual_ok(self) -> bool:
        return all(
            r.max_residual is not None and r.max_residual < RESIDUAL_TOLERANCE
            for r in self.residuals
        )

    def to_json_dict(self) -> dict:
        return {
            "case": self.case,
            "problem": self.problem,
            "symbolic_pass": self.symbolic_pass,
            "failing_powers": self.failing_powers,
            "residuals": [r.to_json_dict() for r in self.residuals],
            "note": self.note,
            "expected": self.expected,
            "matches_expected": self.matches_expected,
        }


def default_z_samples(count: int = DEFAULT_Z_SAMPLES, seed: int = 0) -> list[complex]:
    rng = random.Random(seed)
    return [
        complex(rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0)) for _ in range(count)
    ]


class _DerivationCache:
    def __init__(self, root: Path):
        self.root = root
        self._problems: dict = {}
        self._systems: dict = {}

    def problem(self, name: str):
        if name not in self._problems:
            self._problems[name] = parse_problem(problem_path(name, self.root))
        return self._problems[name]

    def derived(self, case: CandidateFile) -> DerivedSystem:
        key = (case.problem, case.pipeline, case.transform)
        if key not in self._systems:
            self._systems[key] = derive_system(
                self.problem(case.problem),
                pipeline=case.pipeline,
                transform=case.transform,
            )
        return self._systems[key]


def run_case(case: CandidateFile, cache: _DerivationCache, seed: int = 0) -> CaseResult:
    derived = cache.derived(case)
    report = verify_candidate(derived.system, case.candidate)
    result = CaseResult(
        case=case.candidate.source,
        problem=case.problem or "?",
        symbolic_pass=report.passed,
        failing_powers=report.failing_powers(),
        note=case.note,
        expected=case.expected,
    )
    if not report.passed:
        return result

    solution = assemble_solution(case.candidate, derived.ansatz, "tan", derived.ode)
    samples = default_z_samples(seed=seed)
    for inst in case.instantiations:
        try:
            bindings = dict(inst)
            speed = derived.ode.speed
            if speed not in bindings and speed in case.candidate.bindings:
                from .expr_core import eval_complex

                bindings[speed] = eval_complex(
                    case.candidate.binding_expr(speed), inst
                )
            rep = ode_residual(
                derived.ode,
                {derived.ode.profiles[0]: solution.expansion_z},
                samples,
                bindings,
            )
            result.residuals.append(
                InstantiationResult(
                    params=inst, max_residual=rep.max_residual, skipped=rep.skipped
                )
            )
        except MedaError as exc:
            result.residuals.append(
                InstantiationResult(params=inst, max_residual=None, error=str(exc))
            )
    return result


def run_compat(
    fixtures=None, case_filter: str | None = None, seed: int = 0
) -> list[CaseResult]:
    root = fixtures_root(fixtures)
    cache = _DerivationCache(root)
    results = []
    for path in discover_cases(root):
        case = load_candidate(path)
        if case_filter and case.candidate.source != case_filter:
            continue
        results.append(run_case(case, cache, seed=seed))
    if case_filter and not results:
        raise MedaError(f"no case fixture named {case_filter!r}")
    return results


def render_markdown(results) -> str:
    lines = [
        "| case | problem | symbolic | residual max | expected | note |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for r in results:
        if r.symbolic_pass:
            if r.residuals:
                res = "; ".join(
                    f"{x.max_residual:.2e}" if x.max_residual is not None else "error"
                    for x in r.residuals
                )
            else:
                res = "-"
        else:
            res = f"fails at phi^{{{', '.join(map(str, r.failing_powers))}}}"
        expected = r.expected or "-"
        if r.matches_expected is False:
            expected += " (MISMATCH)"
        lines.append(
            f"| {r.case} | {r.problem} | "
            f"{'pass' if r.symbolic_pass else 'FAIL'} | {res} | {expected} | "
            f"{r.note or ''} |"
        )
    return "\n".join(lines)
