"""From float networks to exact polynomial certificates.

Soundness attaches to the object the solver actually sees, so the float
weights are first mapped to the exact rationals they denote in binary
floating point (no rounding is involved: every finite double is a dyadic
rational).  The network function is then expanded layer by layer into a
closed-form polynomial with those exact coefficients, and the certificate
pair (V, Vdot) is built from it.  The float network and the exact network
agree up to float evaluation error only.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynamics import VectorField
from .network import Lnn
from .poly import Polynomial, float_to_fraction

DEFAULT_MAX_DEGREE = 12


class DegreeCapError(ValueError):
    """Symbolic expansion would exceed the configured degree cap."""


@dataclass(frozen=True)
class RationalWeights:
    """Exact-rational view of a network's effective weights."""

    hidden: tuple[tuple[tuple[Fraction, ...], ...], ...]
    output: tuple[Fraction, ...]

    def table(self) -> list[str]:
        lines = []
        for i, matrix in enumerate(self.hidden, start=1):
            for r, row in enumerate(matrix):
                for c, value in enumerate(row):
                    lines.append(f"W{i}[{r},{c}] = {value}")
        for j, value in enumerate(self.output):
            lines.append(f"Wout[{j}] = {value}")
        return lines


def rationalize_weights(net: Lnn) -> RationalWeights:
    """Exact rationals for every effective weight; error on NaN/inf."""
    hidden = tuple(
        tuple(tuple(float_to_fraction(v) for v in row) for row in matrix)
        for matrix in net.hidden_weights
    )
    output = tuple(float_to_fraction(v) for v in net.output_weights)
    return RationalWeights(hidden, output)


def expand_network(net: Lnn, max_total_degree: int = DEFAULT_MAX_DEGREE) -> Polynomial:
    """Exact closed-form polynomial equal to the network function.

    The total degree is the product of the activation degrees; expansion
    refuses to run past max_total_degree rather than blow up silently.
    """
    if net.shape.total_degree > max_total_degree:
        raise DegreeCapError(
            f"expansion degree {net.shape.total_degree} exceeds the cap {max_total_degree}"
        )
    weights = rationalize_weights(net)
    n = net.input_dim
    layer: list[Polynomial] = [Polynomial.variable(n, i) for i in range(n)]
    for matrix, degree in zip(weights.hidden, net.shape.activation_degrees):
        next_layer = []
        for row in matrix:
            combo = Polynomial.zero(n)
            for coeff, poly in zip(row, layer):
                if coeff:
                    combo = combo + poly * coeff
            next_layer.append(combo**degree)
        layer = next_layer
    result = Polynomial.zero(n)
    for coeff, poly in zip(weights.output, layer):
        if coeff:
            result = result + poly * coeff
    return result


def lie_derivative(v: Polynomial, field: VectorField) -> Polynomial:
    """Exact directional derivative of v along the field: sum_i dv/dx_i * f_i."""
    if v.dimension != field.dimension:
        raise ValueError(
            f"polynomial dimension {v.dimension} does not match field dimension {field.dimension}"
        )
    out = Polynomial.zero(v.dimension)
    for i, component in enumerate(field.components):
        out = out + v.partial(i) * component
    return out


@dataclass(frozen=True)
class CertificateCandidate:
    """Exact certificate pair, normally snapshotted from a trained network.

    source_net and weights are None for certificates reloaded from disk.
    """

    v: Polynomial
    vdot: Polynomial
    var_names: tuple[str, ...]
    source_net: Lnn | None = None
    weights: RationalWeights | None = None

    def __post_init__(self):
        if self.v.constant_term != 0 or self.vdot.constant_term != 0:
            raise ValueError("certificate polynomials must vanish at the origin")

    @property
    def dimension(self) -> int:
        return self.v.dimension

    def to_text(self) -> str:
        lines = [
            "lyapunov-certificate v1",
            "vars: " + ", ".join(self.var_names),
            "V: " + self.v.to_text(self.var_names),
            "Vdot: " + self.vdot.to_text(self.var_names),
        ]
        if self.weights is not None:
            lines.append("weights:")
            lines += ["  " + line for line in self.weights.table()]
        return "\n".join(lines) + "\n"


def make_candidate(
    net: Lnn, field: VectorField, max_total_degree: int = DEFAULT_MAX_DEGREE
) -> CertificateCandidate:
    """Expand a network snapshot against a field into an exact candidate."""
    if net.input_dim != field.dimension:
        raise ValueError("network input dimension does not match the field")
    v = expand_network(net, max_total_degree)
    vdot = lie_derivative(v, field)
    return CertificateCandidate(
        v=v,
        vdot=vdot,
        var_names=field.variable_names,
        source_net=net.copy(),
        weights=rationalize_weights(net),
    )


def load_certificate(text: str) -> CertificateCandidate:
    """Parse a certificate file back into an exact candidate (no source
    network attached)."""
    from .poly import parse_polynomial

    lines = text.splitlines()
    if not lines or lines[0].strip() != "lyapunov-certificate v1":
        raise ValueError("not a certificate file")
    var_names: tuple[str, ...] | None = None
    v = vdot = None
    for line in lines[1:]:
        if line.startswith("vars:"):
            var_names = tuple(s.strip() for s in line[len("vars:"):].split(","))
        elif line.startswith("V:"):
            if var_names is None:
                raise ValueError("vars line must precede the V line")
            v = parse_polynomial(line[len("V:"):], var_names)
        elif line.startswith("Vdot:"):
            if var_names is None:
                raise ValueError("vars line must precede the Vdot line")
            vdot = parse_polynomial(line[len("Vdot:"):], var_names)
        elif line.startswith("weights:"):
            break
    if var_names is None or v is None or vdot is None:
        raise ValueError("certificate file is missing vars, V, or Vdot")
    return CertificateCandidate(v=v, vdot=vdot, var_names=var_names)
