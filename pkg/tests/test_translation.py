"""Weight rationalization, symbolic expansion, and the exact Lie derivative."""

from fractions import Fraction

import numpy as np
import pytest

from lyasynth.dynamics import load_system
from lyasynth.network import MODE_FREE, MODE_ONES, Lnn, NetworkShape, init_network
from lyasynth.poly import Polynomial, parse_polynomial
from lyasynth.translation import (
    DegreeCapError,
    CertificateCandidate,
    expand_network,
    lie_derivative,
    make_candidate,
    rationalize_weights,
)

PLANAR = load_system("vars: x, y\nx' = -x + x*y\ny' = -y\n")
ZERO_FIELD = load_system("vars: x, y\nx' = 0\ny' = 0\n")
LINEAR = load_system("vars: x, y\nx' = -x\ny' = -y\n")

SHAPE_2 = NetworkShape(2, (2,), (2,))


def planar_net(w1, w2, w3, w4, out=(1.0, 1.0), mode=MODE_ONES):
    return Lnn(SHAPE_2, [np.array([[w1, w3], [w2, w4]])], np.array(out), mode)


# -- rationalization -------------------------------------------------------------

def test_rationalize_exact_values():
    net = planar_net(0.5, 0.1, 0.0, 1.0)
    weights = rationalize_weights(net)
    assert weights.hidden[0][0][0] == Fraction(1, 2)
    assert weights.hidden[0][1][0] == Fraction(3602879701896397, 36028797018963968)
    assert weights.output == (Fraction(1), Fraction(1))


def test_rationalize_rejects_non_finite():
    net = planar_net(float("nan"), 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        rationalize_weights(net)


def test_rationalize_positive_mode_uses_effective_weights():
    net = init_network(SHAPE_2, "positive", seed=2)
    weights = rationalize_weights(net)
    assert all(w > 0 for w in weights.output)
    for exact, effective in zip(weights.output, net.output_weights):
        assert exact == Fraction(float(effective))


# -- expansion ---------------------------------------------------------------------

def test_expand_single_layer_symbolic_form():
    w1, w2, w3, w4, w5, w6 = 2.0, -1.0, 0.5, 3.0, 1.5, 0.25
    net = planar_net(w1, w2, w3, w4, out=(w5, w6), mode=MODE_FREE)
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    expected = (
        (x * Fraction(w1) + y * Fraction(w3)) ** 2 * Fraction(w5)
        + (x * Fraction(w2) + y * Fraction(w4)) ** 2 * Fraction(w6)
    )
    assert expand_network(net) == expected


def test_expand_identity_weights():
    assert expand_network(planar_net(1.0, 0.0, 0.0, 1.0)) == parse_polynomial(
        "x^2 + y^2", ["x", "y"]
    )


def test_expand_two_layer_matches_forward():
    net = init_network(NetworkShape(2, (3, 2), (2, 2)), MODE_FREE, seed=6)
    poly = expand_network(net)
    assert poly.total_degree <= 4
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.uniform(-3, 3, size=2)
        forward, _ = net.forward(x)
        exact = poly.eval_rational([Fraction(v) for v in x])
        assert abs(float(exact) - forward) <= 1e-9 * max(1.0, abs(forward))


def test_expand_degree_cap():
    shape = NetworkShape(2, (2, 2), (4, 4))  # total degree 16
    net = init_network(shape, MODE_ONES, seed=0)
    with pytest.raises(DegreeCapError):
        expand_network(net)
    assert expand_network(net, max_total_degree=16).total_degree <= 16


def test_expand_constant_term_is_exactly_zero():
    for seed in range(5):
        net = init_network(NetworkShape(3, (4,), (2,)), MODE_FREE, seed=seed)
        assert expand_network(net).constant_term == 0


# -- lie derivative ---------------------------------------------------------------

def test_lie_derivative_planar_example():
    v = parse_polynomial("x^2 + y^2", ["x", "y"])
    expected = parse_polynomial("-2*x^2 + 2*x^2*y - 2*y^2", ["x", "y"])
    assert lie_derivative(v, PLANAR) == expected


def test_lie_derivative_zero_field():
    v = parse_polynomial("x^2 + y^2", ["x", "y"])
    assert lie_derivative(v, ZERO_FIELD).is_zero


def test_lie_derivative_linear_field():
    v = parse_polynomial("x^2 + y^2", ["x", "y"])
    assert lie_derivative(v, LINEAR) == parse_polynomial("-2*x^2 - 2*y^2", ["x", "y"])


def test_lie_derivative_dimension_mismatch():
    with pytest.raises(ValueError):
        lie_derivative(Polynomial.variable(3, 0), PLANAR)


def test_lie_derivative_matches_network_vdot():
    net = init_network(SHAPE_2, MODE_ONES, seed=13)
    cand = make_candidate(net, PLANAR)
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = rng.uniform(-4, 4, size=2)
        exact = cand.vdot.eval_rational([Fraction(v) for v in x])
        approx = net.vdot(PLANAR, x)
        assert float(exact) == pytest.approx(approx, rel=1e-9, abs=1e-12)


# -- candidates ----------------------------------------------------------------------

def test_make_candidate_consistency():
    net = init_network(SHAPE_2, MODE_ONES, seed=3)
    cand = make_candidate(net, PLANAR)
    assert cand.vdot == lie_derivative(cand.v, PLANAR)
    assert cand.v.constant_term == 0
    assert cand.vdot.constant_term == 0
    assert cand.var_names == ("x", "y")
    # The snapshot is decoupled from the live network.
    net.hidden_weights[0][0, 0] += 1.0
    assert cand.source_net.hidden_weights[0][0, 0] != net.hidden_weights[0][0, 0]


def test_candidate_rejects_nonzero_constant_term():
    v = parse_polynomial("x^2 + 1", ["x", "y"])
    with pytest.raises(ValueError):
        CertificateCandidate(
            v=v,
            vdot=Polynomial.zero(2),
            var_names=("x", "y"),
            source_net=init_network(SHAPE_2, MODE_ONES, seed=0),
            weights=rationalize_weights(init_network(SHAPE_2, MODE_ONES, seed=0)),
        )


def test_certificate_text_contains_exact_weights():
    net = planar_net(0.5, 0.25, -0.5, 1.0)
    cand = make_candidate(net, PLANAR)
    text = cand.to_text()
    assert "lyapunov-certificate v1" in text
    assert "vars: x, y" in text
    assert "W1[0,0] = 1/2" in text
    # The V line re-parses to the same polynomial.
    v_line = next(l for l in text.splitlines() if l.startswith("V: "))
    assert parse_polynomial(v_line[len("V: "):], ["x", "y"]) == cand.v
