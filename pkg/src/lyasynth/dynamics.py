"""Vector fields, domains of interest, and the built-in benchmark systems.

A synthesis problem is a polynomial vector field with an equilibrium at the
origin together with a domain around the origin.  Domains are described by
squared-norm constraints only, so every membership test and every verifier
query stays inside polynomial arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .poly import Polynomial, float_to_fraction, parse_polynomial

Rational = Union[int, float, Fraction, str]

BALL = "ball"
ORTHANT_BALL = "orthant_ball"
ORTHANT_ANNULUS = "orthant_annulus"
_DOMAIN_KINDS = (BALL, ORTHANT_BALL, ORTHANT_ANNULUS)


class SystemFormatError(ValueError):
    """Malformed system file."""


class EquilibriumError(ValueError):
    """The vector field does not vanish at the origin."""


def _as_fraction(value: Rational) -> Fraction:
    if isinstance(value, float):
        return float_to_fraction(value)
    return Fraction(value)


@dataclass(frozen=True)
class DomainSpec:
    """Region of interest: a ball, its positive-orthant part, or an annulus
    in the positive orthant.  gamma is the outer radius; rho the inner
    radius (orthant_annulus only)."""

    kind: str
    gamma: Fraction
    rho: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in _DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "gamma", _as_fraction(self.gamma))
        object.__setattr__(self, "rho", _as_fraction(self.rho))
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.kind == ORTHANT_ANNULUS and not 0 < self.rho < self.gamma:
            raise ValueError("orthant_annulus requires 0 < rho < gamma")
        if self.kind != ORTHANT_ANNULUS and self.rho != 0:
            raise ValueError(f"rho is only meaningful for {ORTHANT_ANNULUS}")

    @property
    def orthant(self) -> bool:
        return self.kind in (ORTHANT_BALL, ORTHANT_ANNULUS)

    def contains(self, point: Sequence[Rational]) -> bool:
        """Exact membership, evaluated on squared norms."""
        coords = [_as_fraction(v) for v in point]
        if self.orthant and any(v < 0 for v in coords):
            return False
        sq = sum(v * v for v in coords)
        if sq > self.gamma**2:
            return False
        if self.kind == ORTHANT_ANNULUS and sq < self.rho**2:
            return False
        return True

    def contains_mask(self, points: np.ndarray) -> np.ndarray:
        """Vectorized float membership for an (m, n) array."""
        points = np.asarray(points, dtype=float)
        sq = np.sum(points * points, axis=1)
        mask = sq <= float(self.gamma) ** 2
        if self.orthant:
            mask &= np.all(points >= 0.0, axis=1)
        if self.kind == ORTHANT_ANNULUS:
            mask &= sq >= float(self.rho) ** 2
        return mask

    def bounding_box(self, dimension: int) -> tuple[np.ndarray, np.ndarray]:
        g = float(self.gamma)
        lo = np.zeros(dimension) if self.orthant else np.full(dimension, -g)
        return lo, np.full(dimension, g)

    def describe(self) -> str:
        if self.kind == ORTHANT_ANNULUS:
            return f"{self.kind} {self.rho} {self.gamma}"
        return f"{self.kind} {self.gamma}"


@dataclass(frozen=True)
class VectorField:
    """Polynomial ODE right-hand side with equilibrium at the origin."""

    variable_names: tuple[str, ...]
    components: tuple[Polynomial, ...]

    def __post_init__(self):
        n = len(self.variable_names)
        if n == 0 or len(self.components) != n:
            raise ValueError("need one component per variable")
        for name, comp in zip(self.variable_names, self.components):
            if comp.dimension != n:
                raise ValueError(f"component {name}' has dimension {comp.dimension}, expected {n}")
        origin = [Fraction(0)] * n
        for name, comp in zip(self.variable_names, self.components):
            if comp.eval_rational(origin) != 0:
                raise EquilibriumError(
                    f"equilibrium violation: component {name}' is nonzero at the origin"
                )

    @property
    def dimension(self) -> int:
        return len(self.variable_names)

    def eval_float(self, x: Sequence[float]) -> list[float]:
        if len(x) != self.dimension:
            raise ValueError(f"point has {len(x)} coordinates, expected {self.dimension}")
        return [comp.eval_float(x) for comp in self.components]

    def eval_float_batch(self, points: np.ndarray) -> np.ndarray:
        out = np.empty((points.shape[0], self.dimension))
        for i, comp in enumerate(self.components):
            out[:, i] = comp.eval_float_batch(points)
        return out

    def eval_rational(self, point: Sequence[Rational]) -> list[Fraction]:
        coords = [_as_fraction(v) for v in point]
        return [comp.eval_rational(coords) for comp in self.components]

    def to_source(self, domain: DomainSpec | None = None) -> str:
        lines = ["vars: " + ", ".join(self.variable_names)]
        for name, comp in zip(self.variable_names, self.components):
            lines.append(f"{name}' = {comp.to_text(self.variable_names)}")
        if domain is not None:
            lines.append("domain: " + domain.describe())
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# System file format:
#   # comment
#   vars: x, y
#   x' = -x + x*y
#   y' = -y
#   domain: ball 100            (or: orthant_ball 1 | orthant_annulus 0.1 1)
# ---------------------------------------------------------------------------

def parse_domain_line(text: str) -> DomainSpec:
    parts = text.split()
    if not parts:
        raise SystemFormatError("empty domain declaration")
    kind, args = parts[0], parts[1:]
    try:
        if kind == BALL and len(args) == 1:
            return DomainSpec(BALL, Fraction(args[0]))
        if kind == ORTHANT_BALL and len(args) == 1:
            return DomainSpec(ORTHANT_BALL, Fraction(args[0]))
        if kind == ORTHANT_ANNULUS and len(args) == 2:
            return DomainSpec(ORTHANT_ANNULUS, Fraction(args[1]), Fraction(args[0]))
    except (ValueError, ZeroDivisionError) as err:
        raise SystemFormatError(f"bad domain parameters in {text!r}: {err}") from err
    raise SystemFormatError(f"bad domain declaration {text!r}")


def parse_system(text: str) -> tuple[VectorField, DomainSpec | None]:
    """Parse a system file; checks the origin equilibrium exactly."""
    var_names: list[str] | None = None
    equations: dict[str, Polynomial] = {}
    domain: DomainSpec | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vars:"):
            if var_names is not None:
                raise SystemFormatError(f"line {lineno}: duplicate vars declaration")
            var_names = [v.strip() for v in line[len("vars:"):].split(",") if v.strip()]
            if not var_names or len(set(var_names)) != len(var_names):
                raise SystemFormatError(f"line {lineno}: bad vars declaration")
            continue
        if line.startswith("domain:"):
            if domain is not None:
                raise SystemFormatError(f"line {lineno}: duplicate domain declaration")
            domain = parse_domain_line(line[len("domain:"):].strip())
            continue
        if "=" in line:
            lhs, rhs = line.split("=", 1)
            lhs = lhs.strip()
            if not lhs.endswith("'"):
                raise SystemFormatError(f"line {lineno}: left side must be a primed variable")
            name = lhs[:-1].strip()
            if var_names is None:
                raise SystemFormatError(f"line {lineno}: vars must be declared before equations")
            if name not in var_names:
                raise SystemFormatError(f"line {lineno}: unknown variable {name!r}")
            if name in equations:
                raise SystemFormatError(f"line {lineno}: duplicate equation for {name!r}")
            equations[name] = parse_polynomial(rhs, var_names)
            continue
        raise SystemFormatError(f"line {lineno}: unrecognized line {line!r}")
    if var_names is None:
        raise SystemFormatError("missing vars declaration")
    missing = [v for v in var_names if v not in equations]
    if missing:
        raise SystemFormatError(f"missing equation for {', '.join(missing)}")
    field = VectorField(tuple(var_names), tuple(equations[v] for v in var_names))
    return field, domain


def load_system(source: str | Path) -> VectorField:
    """Load a vector field from a file path or from literal system text."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text()
    field, _ = parse_system(text)
    return field


# ---------------------------------------------------------------------------
# Built-in benchmarks.  The registry is constructed by parsing the embedded
# source text, so these double as a parser corpus; to_source() round-trips
# them back out as files.
# ---------------------------------------------------------------------------

_BENCHMARK_SOURCES: dict[str, str] = {
    # Planar system, stable at the origin but with no global polynomial
    # certificate; the default domain is the radius-100 disc.
    "parrilo": """\
vars: x, y
x' = -x + x*y
y' = -y
domain: ball 100
""",
    # Planar variant with a squared cross term.
    "square2d": """\
vars: x, y
x' = -x + 2*x^2*y
y' = -y
domain: orthant_ball 100
""",
    # Three-dimensional coupled system, mildly nonlinear.
    "easy3d": """\
vars: x, y, z
x' = -x
y' = -2*y + 0.1*x*y^2 + z
z' = -z - 1.5*y
domain: orthant_ball 1000
""",
    # Three-dimensional system with a cubic cross term.
    "hard3d": """\
vars: x, y, z
x' = -3*x - 0.1*x*y^3
y' = -y + z
z' = -z
domain: orthant_ball 1000
""",
}


@dataclass(frozen=True)
class Benchmark:
    id: str
    field: VectorField
    default_domain: DomainSpec


def benchmark_ids() -> list[str]:
    return list(_BENCHMARK_SOURCES)


def benchmark_source(benchmark_id: str) -> str:
    try:
        return _BENCHMARK_SOURCES[benchmark_id]
    except KeyError:
        raise KeyError(
            f"unknown benchmark {benchmark_id!r}; known: {', '.join(_BENCHMARK_SOURCES)}"
        ) from None


def get_benchmark(benchmark_id: str) -> Benchmark:
    source = benchmark_source(benchmark_id)
    field, domain = parse_system(source)
    assert domain is not None
    return Benchmark(benchmark_id, field, domain)


def write_benchmark_files(directory: str | Path) -> list[Path]:
    """Export every built-in benchmark as a .ode system file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for bid in benchmark_ids():
        path = directory / f"{bid}.ode"
        path.write_text(benchmark_source(bid))
        paths.append(path)
    return paths
