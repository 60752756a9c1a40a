"""Certificate verification through satisfiability queries over QF_NRA.

Validity over the dense domain is decided by checking the two
falsification formulas

    phi1:  x in D  and  x != 0  and  Vdot(x) >= 0
    phi2:  x in D  and  x != 0  and  V(x) <= 0

with an external SMT solver; both unsatisfiable means the certificate is
valid.  Domain membership is encoded with squared-norm polynomial
constraints and x != 0 as sum(x_i^2) > 0, so every query is a conjunction
of polynomial sign conditions with exact rational coefficients.

Every model a solver returns is re-validated in exact rational arithmetic
before it is allowed to reach the synthesis loop; a counterexample that
fails this gate is never injected.  The solver itself is a configuration
(any executable that reads SMT-LIB2 on stdin and supports QF_NRA), not a
library dependency.
"""

from __future__ import annotations

import math
import os
import shlex
import shutil
import subprocess
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import ORTHANT_ANNULUS, DomainSpec
from .poly import Polynomial, float_to_fraction, squared_norm
from .translation import CertificateCandidate

PHI1 = "phi1"
PHI2 = "phi2"

SOLVER_ENV_VAR = "LYASYNTH_SOLVER"


@dataclass(frozen=True)
class SolverConfig:
    executable: str
    args: tuple[str, ...] = ()
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("solver time limit must be positive")

    @property
    def command(self) -> list[str]:
        return [self.executable, *self.args]


def discover_solver(timeout_s: float = 30.0) -> SolverConfig | None:
    """Locate a usable SMT-LIB2 solver.

    Order: the LYASYNTH_SOLVER environment variable (a command line), a z3
    or cvc5 binary on PATH, then the bundled WebAssembly shim under
    tools/ (requires `scripts/setup_solver.sh` to have been run).
    """
    env = os.environ.get(SOLVER_ENV_VAR)
    if env:
        parts = shlex.split(env)
        return SolverConfig(parts[0], tuple(parts[1:]), timeout_s)
    z3 = shutil.which("z3")
    if z3:
        return SolverConfig(z3, ("-in",), timeout_s)
    cvc5 = shutil.which("cvc5")
    if cvc5:
        return SolverConfig(cvc5, (), timeout_s)
    node = shutil.which("node")
    if node:
        candidates = [Path.cwd(), *Path.cwd().parents]
        candidates.append(Path(__file__).resolve().parents[2])
        for root in candidates:
            shim = root / "tools" / "z3smt.js"
            if shim.exists() and (root / "tools" / "node_modules").exists():
                return SolverConfig(node, (str(shim),), timeout_s)
    return None


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

# An atom is the sign condition `poly op 0`.
_OPS = ("<=", "<", ">=", ">")


@dataclass(frozen=True)
class Atom:
    poly: Polynomial
    op: str

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown relation {self.op!r}")

    def holds_exact(self, point: Sequence[Fraction]) -> bool:
        value = self.poly.eval_rational(point)
        if self.op == "<=":
            return value <= 0
        if self.op == "<":
            return value < 0
        if self.op == ">=":
            return value >= 0
        return value > 0


@dataclass(frozen=True)
class FalsificationQuery:
    which: str  # PHI1 or PHI2
    var_names: tuple[str, ...]
    atoms: tuple[Atom, ...]
    domain: DomainSpec

    def holds_exact(self, point: Sequence[Fraction]) -> bool:
        return all(atom.holds_exact(point) for atom in self.atoms)


def domain_atoms(domain: DomainSpec, dimension: int) -> list[Atom]:
    sq = squared_norm(dimension)
    atoms = [Atom(sq - domain.gamma**2, "<=")]
    if domain.orthant:
        for i in range(dimension):
            atoms.append(Atom(Polynomial.variable(dimension, i), ">="))
    if domain.kind == ORTHANT_ANNULUS:
        atoms.append(Atom(sq - domain.rho**2, ">="))
    return atoms


def build_queries(
    cand: CertificateCandidate, domain: DomainSpec
) -> tuple[FalsificationQuery, FalsificationQuery]:
    """The two falsification queries for a candidate over a domain."""
    n = cand.dimension
    base = domain_atoms(domain, n) + [Atom(squared_norm(n), ">")]
    phi1 = FalsificationQuery(
        PHI1, cand.var_names, tuple(base + [Atom(cand.vdot, ">=")]), domain
    )
    phi2 = FalsificationQuery(
        PHI2, cand.var_names, tuple(base + [Atom(cand.v, "<=")]), domain
    )
    return phi1, phi2


# ---------------------------------------------------------------------------
# SMT-LIB2 emission
# ---------------------------------------------------------------------------

def _smt_rational(value: Fraction) -> str:
    num, den = value.numerator, value.denominator
    body = str(abs(num)) if den == 1 else f"(/ {abs(num)} {den})"
    return f"(- {body})" if num < 0 else body


def _smt_polynomial(poly: Polynomial, var_names: Sequence[str]) -> str:
    if poly.is_zero:
        return "0"
    terms = []
    for mono, coeff in poly.sorted_terms():
        factors = [_smt_rational(coeff)]
        for name, e in zip(var_names, mono):
            factors.extend([name] * e)
        terms.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def emit_smtlib(query: FalsificationQuery) -> str:
    """Deterministic SMT-LIB2 v2.6 script for one query.

    Coefficients are emitted as exact integer or (/ num den) terms, never
    as decimals; terms follow the canonical graded-lex order, so the same
    query always produces byte-identical scripts.
    """
    lines = [f"; falsification query {query.which}", "(set-logic QF_NRA)"]
    for name in query.var_names:
        lines.append(f"(declare-const {name} Real)")
    atoms = [
        f"({atom.op} {_smt_polynomial(atom.poly, query.var_names)} 0)"
        for atom in query.atoms
    ]
    body = atoms[0] if len(atoms) == 1 else "(and " + " ".join(atoms) + ")"
    lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver output parsing
# ---------------------------------------------------------------------------

class _RootObject(Exception):
    """Model contains an algebraic (root-obj) value."""


def _sexpr_tokens(text: str) -> list[str]:
    out: list[str] = []
    token = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            if token:
                out.append("".join(token))
                token = []
            out.append(ch)
        elif ch.isspace():
            if token:
                out.append("".join(token))
                token = []
        elif ch == '"':
            j = i + 1
            while j < len(text) and text[j] != '"':
                j += 1
            out.append(text[i : j + 1])
            i = j
        else:
            token.append(ch)
        i += 1
    if token:
        out.append("".join(token))
    return out


def parse_sexprs(text: str) -> list:
    """All top-level s-expressions (atoms as strings, lists as lists)."""
    tokens = _sexpr_tokens(text)
    pos = 0

    def read():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok != "(":
            return tok
        items = []
        while pos < len(tokens) and tokens[pos] != ")":
            items.append(read())
        pos += 1  # closing paren
        return items

    out = []
    while pos < len(tokens):
        out.append(read())
    return out


def _value_to_fraction(node) -> tuple[Fraction, bool]:
    """Numeric model term to (value, approximate-flag)."""
    if isinstance(node, str):
        text = node
        approximate = text.endswith("?")
        if approximate:
            text = text[:-1]
        return Fraction(text), approximate
    if node and node[0] == "-" and len(node) == 2:
        value, approx = _value_to_fraction(node[1])
        return -value, approx
    if node and node[0] == "/" and len(node) == 3:
        num, a1 = _value_to_fraction(node[1])
        den, a2 = _value_to_fraction(node[2])
        return num / den, a1 or a2
    if node and node[0] == "root-obj":
        raise _RootObject()
    raise ValueError(f"unrecognized model value {node!r}")


def parse_model(
    output: str, var_names: Sequence[str]
) -> tuple[dict[str, Fraction], bool]:
    """Extract variable assignments from a get-model answer.

    Accepts integer, decimal (optionally truncated with a trailing '?'),
    fraction, and negated forms.  Raises _RootObject on algebraic values
    and ValueError when a variable is missing or unreadable.
    """
    assignments: dict[str, Fraction] = {}
    approximate = False
    for expr in parse_sexprs(output):
        if not isinstance(expr, list):
            continue
        items = expr[1:] if expr and expr[0] == "model" else expr
        for item in items:
            if (
                isinstance(item, list)
                and len(item) == 5
                and item[0] == "define-fun"
                and isinstance(item[1], str)
            ):
                value, approx = _value_to_fraction(item[4])
                assignments[item[1]] = value
                approximate |= approx
    missing = [v for v in var_names if v not in assignments]
    if missing:
        raise ValueError(f"model is missing variables: {', '.join(missing)}")
    return assignments, approximate


# ---------------------------------------------------------------------------
# Running queries
# ---------------------------------------------------------------------------

@dataclass
class QueryResult:
    which: str
    status: str  # "sat" | "unsat" | "unknown"
    model: tuple[Fraction, ...] | None = None
    model_approximate: bool = False
    reason: str | None = None  # for unknown: timeout | solver-unknown | solver-error
    raw_output: str = ""
    script: str = ""


def _invoke(cfg: SolverConfig, script: str) -> tuple[str | None, str]:
    """Run the solver once; (None, output) on timeout."""
    try:
        proc = subprocess.run(
            cfg.command,
            input=script,
            capture_output=True,
            text=True,
            timeout=cfg.timeout_s,
        )
    except subprocess.TimeoutExpired as err:
        partial = err.stdout if isinstance(err.stdout, str) else ""
        return None, partial or ""
    except OSError as err:
        raise RuntimeError(f"failed to launch solver {cfg.command}: {err}") from err
    return proc.stdout, proc.stdout + proc.stderr


_DECIMAL_HEADER = "(set-option :pp.decimal true)\n(set-option :pp.decimal_precision 40)\n"


def run_query(query: FalsificationQuery, cfg: SolverConfig) -> QueryResult:
    """Launch the solver on one query and interpret its answer.

    The time limit is enforced by killing the subprocess.  sat answers have
    their model parsed into exact rationals; models with algebraic values
    are re-requested in decimal notation (the approximate witness is then
    subject to the exact validation gate downstream).
    """
    script = emit_smtlib(query)
    stdout, raw = _invoke(cfg, script)
    result = QueryResult(which=query.which, status="unknown", raw_output=raw, script=script)
    if stdout is None:
        result.reason = "timeout"
        return result
    status = next((line.strip() for line in stdout.splitlines() if line.strip()), "")
    if status == "unsat":
        result.status = "unsat"
        return result
    if status == "unknown":
        result.reason = "solver-unknown"
        return result
    if status != "sat":
        result.reason = "solver-error"
        return result
    result.status = "sat"
    try:
        assignments, approx = parse_model(stdout, query.var_names)
    except _RootObject:
        # Algebraic model: ask again for a decimal rendering of the witness.
        stdout2, raw2 = _invoke(cfg, _DECIMAL_HEADER + script)
        result.raw_output = raw2
        if stdout2 is None:
            result.status, result.reason = "unknown", "timeout"
            return result
        try:
            assignments, approx = parse_model(stdout2, query.var_names)
        except (ValueError, _RootObject):
            result.status, result.reason = "unknown", "solver-error"
            return result
    except ValueError:
        result.status, result.reason = "unknown", "solver-error"
        return result
    result.model = tuple(assignments[name] for name in query.var_names)
    result.model_approximate = approx
    return result


def run_queries(queries: Sequence[FalsificationQuery], cfg: SolverConfig) -> list[QueryResult]:
    """Run independent queries concurrently, one subprocess each."""
    if len(queries) == 1:
        return [run_query(queries[0], cfg)]
    with ThreadPoolExecutor(max_workers=len(queries)) as pool:
        return list(pool.map(lambda q: run_query(q, cfg), queries))


# ---------------------------------------------------------------------------
# Exact validation and sample-set augmentation
# ---------------------------------------------------------------------------

def validate_counterexample(
    cand: CertificateCandidate,
    point: Sequence[Fraction],
    which: str,
    domain: DomainSpec,
) -> bool:
    """Exact re-check of a claimed counterexample: domain membership,
    nonzero, and the violated condition, all in rational arithmetic."""
    point = [Fraction(v) for v in point]
    if len(point) != cand.dimension:
        return False
    if all(v == 0 for v in point):
        return False
    if not domain.contains(point):
        return False
    if which == PHI1:
        return cand.vdot.eval_rational(point) >= 0
    if which == PHI2:
        return cand.v.eval_rational(point) <= 0
    raise ValueError(f"unknown formula label {which!r}")


def _to_domain_float(point: Sequence[Fraction], domain: DomainSpec) -> tuple[float, ...] | None:
    """Nearest float image of an exact point, pulled into the domain.

    Rounding can push a boundary point just outside; shrink it toward the
    origin (or stretch, for the annulus inner shell) until the exact
    membership test accepts the float image.
    """
    base = np.array([float(v) for v in point])
    for attempt in range(40):
        candidate = tuple(float(v) for v in base)
        if any(v != 0.0 for v in candidate) and domain.contains(
            [float_to_fraction(v) for v in candidate]
        ):
            return candidate
        sq = float(sum(float_to_fraction(v) ** 2 for v in candidate))
        shrink = domain.kind != ORTHANT_ANNULUS or sq > float(domain.rho) ** 2
        base = base * ((1.0 - 1e-12 * 2**attempt) if shrink else (1.0 + 1e-12 * 2**attempt))
    return None


def augment_counterexample(
    point: Sequence[Fraction],
    domain: DomainSpec,
    count: int,
    radius_fraction: float,
    seed: int,
) -> list[tuple[float, ...]]:
    """The counterexample plus `count` random neighbors inside the domain.

    Neighbors are drawn uniformly from the ball of radius
    radius_fraction * gamma around the point and rejection-filtered to lie
    in the domain and differ from the origin.  Deterministic given seed.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    dim = len(point)
    rng = np.random.default_rng(seed)
    out: list[tuple[float, ...]] = []
    base = _to_domain_float(point, domain)
    if base is None:
        warnings.warn("counterexample has no in-domain float image; dropping it")
        center = np.array([float(v) for v in point])
    else:
        out.append(base)
        center = np.array(base)
    radius = radius_fraction * float(domain.gamma)
    accepted = 0
    attempts = 0
    limit = 100 * count if count else 0
    while accepted < count and attempts < limit:
        attempts += 1
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            continue
        offset = direction / norm * radius * rng.random() ** (1.0 / dim)
        candidate = tuple(float(v) for v in center + offset)
        if all(v == 0.0 for v in candidate):
            continue
        if domain.contains([float_to_fraction(v) for v in candidate]):
            out.append(candidate)
            accepted += 1
    if accepted < count:
        warnings.warn(
            f"neighborhood sampling accepted only {accepted} of {count} points"
        )
    return out


# ---------------------------------------------------------------------------
# Cheap float-level falsification (never certifies validity)
# ---------------------------------------------------------------------------

def _violation_scores(cand: CertificateCandidate, points: np.ndarray) -> np.ndarray:
    """max(Vdot, -V) per point; >= 0 means a float-level violation."""
    vdot = cand.vdot.eval_float_batch(points)
    v = cand.v.eval_float_batch(points)
    return np.maximum(vdot, -v)


def _exactify(point: np.ndarray) -> tuple[Fraction, ...]:
    return tuple(float_to_fraction(float(v)) for v in point)


def fallback_falsify(
    cand: CertificateCandidate,
    domain: DomainSpec,
    budget: int,
    seed: int = 0,
) -> tuple[tuple[Fraction, ...], str] | None:
    """Random search plus hill climbing for a float-level violation.

    Any hit is exactly re-validated before being reported; returning None
    proves nothing.  The search is deterministic given seed.
    """
    if budget <= 0:
        return None
    dim = cand.dimension
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box(dim)
    gamma = float(domain.gamma)

    best_points: list[np.ndarray] = []
    scan_budget = max(1, int(budget * 0.7))
    used = 0
    while used < scan_budget:
        block = min(4096, scan_budget - used)
        used += block
        points = rng.uniform(lo, hi, size=(block, dim))
        points = points[domain.contains_mask(points)]
        points = points[np.any(points != 0.0, axis=1)]
        if points.shape[0] == 0:
            continue
        scores = _violation_scores(cand, points)
        order = np.argsort(scores)[::-1][:5]
        best_points.extend(points[i] for i in order if scores[i] > -np.inf)

    if not best_points:
        return None
    scored = sorted(
        best_points,
        key=lambda p: float(_violation_scores(cand, p[None, :])[0]),
        reverse=True,
    )[:5]

    climb_budget = budget - used
    climbed: list[np.ndarray] = []
    for start in scored:
        current = start.copy()
        current_score = float(_violation_scores(cand, current[None, :])[0])
        step = 0.05 * gamma
        spent = 0
        share = max(1, climb_budget // len(scored))
        while spent < share and step > 1e-12 * gamma:
            block = min(64, share - spent)
            spent += block
            proposals = current + rng.standard_normal((block, dim)) * step
            proposals = proposals[domain.contains_mask(proposals)]
            if proposals.shape[0]:
                scores = _violation_scores(cand, proposals)
                i = int(np.argmax(scores))
                if scores[i] > current_score:
                    current, current_score = proposals[i], float(scores[i])
                    continue
            step *= 0.5
        climbed.append(current)

    candidates = sorted(
        climbed + scored,
        key=lambda p: float(_violation_scores(cand, p[None, :])[0]),
        reverse=True,
    )
    for point in candidates:
        exact = _exactify(point)
        for which in (PHI1, PHI2):
            if validate_counterexample(cand, exact, which, domain):
                return exact, which
    return None


def refine_near_witness(
    cand: CertificateCandidate,
    domain: DomainSpec,
    witness: Sequence[Fraction],
    which: str,
    seed: int = 0,
    attempts: int = 2000,
) -> tuple[tuple[Fraction, ...], str] | None:
    """Local search around an approximate solver witness that failed exact
    validation; used when a model had to be decimal-approximated."""
    dim = len(witness)
    rng = np.random.default_rng(seed)
    center = np.array([float(v) for v in witness])
    for scale in (1e-12, 1e-9, 1e-6, 1e-3):
        block = max(1, attempts // 4)
        points = center + rng.standard_normal((block, dim)) * (scale * float(domain.gamma))
        points = np.vstack([center, points])
        points = points[domain.contains_mask(points)]
        if points.shape[0] == 0:
            continue
        scores = _violation_scores(cand, points)
        for i in np.argsort(scores)[::-1][:10]:
            exact = _exactify(points[i])
            if validate_counterexample(cand, exact, which, domain):
                return exact, which
    return None


def sample_violations(
    cand: CertificateCandidate,
    domain: DomainSpec,
    count: int,
    seed: int = 0,
) -> int:
    """Number of float-level violations of (Vdot < 0 and V > 0) among
    `count` uniform samples in the domain (origin excluded).  Statistical
    corroboration only; proves nothing."""
    dim = cand.dimension
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box(dim)
    violations = 0
    remaining = count
    while remaining > 0:
        block = min(65536, remaining)
        points = rng.uniform(lo, hi, size=(block, dim))
        points = points[domain.contains_mask(points)]
        points = points[np.any(points != 0.0, axis=1)]
        if points.shape[0] == 0:
            continue
        taken = points[: min(points.shape[0], remaining)]
        remaining -= taken.shape[0]
        vdot = cand.vdot.eval_float_batch(taken)
        v = cand.v.eval_float_batch(taken)
        violations += int(np.sum((vdot >= 0.0) | (v <= 0.0)))
    return violations
