"""Polynomial arithmetic, parsing, and printing."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyasynth.poly import (
    ParseError,
    Polynomial,
    default_var_names,
    float_to_fraction,
    format_rational,
    parse_polynomial,
    squared_norm,
)


def poly_from_text(text: str, dim: int = 2) -> Polynomial:
    return parse_polynomial(text, default_var_names(dim))


# -- strategies -------------------------------------------------------------

# Coefficients whose denominators divide a power of 10, i.e. the class the
# canonical printer can render exactly (all coefficients this package
# produces are of this form: floats are dyadic, source literals are decimal).
decimal_fractions = st.builds(
    lambda num, a, b: Fraction(num, 2**a * 5**b),
    st.integers(min_value=-10**6, max_value=10**6),
    st.integers(min_value=0, max_value=8),
    st.integers(min_value=0, max_value=4),
)


@st.composite
def polynomials(draw, max_dim=3, max_degree=5, max_terms=6):
    dim = draw(st.integers(1, max_dim))
    n_terms = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n_terms):
        mono = tuple(
            draw(st.integers(0, max_degree)) for _ in range(dim)
        )
        terms[mono] = draw(decimal_fractions)
    return Polynomial(dim, terms)


@st.composite
def poly_pairs(draw):
    p = draw(polynomials())
    q = draw(polynomials(max_dim=p.dimension))
    # Rebuild q in p's dimension by padding exponents with zeros.
    terms = {m + (0,) * (p.dimension - len(m)): c for m, c in q.terms.items()}
    return p, Polynomial(p.dimension, terms)


rational_points = st.lists(
    st.fractions(min_value=-100, max_value=100), min_size=1, max_size=3
)


# -- construction and canonical form ----------------------------------------

def test_zero_coefficients_are_stripped():
    p = Polynomial(2, {(1, 0): Fraction(0), (0, 1): Fraction(2)})
    assert (1, 0) not in p.terms
    assert p == Polynomial(2, {(0, 1): 2})


def test_equality_is_term_map_equality():
    p = poly_from_text("x^2 + y^2")
    q = poly_from_text("y^2 + x^2")
    assert p == q
    assert hash(p) == hash(q)
    assert p != poly_from_text("x^2")


def test_bad_monomials_rejected():
    with pytest.raises(ValueError):
        Polynomial(2, {(1,): Fraction(1)})
    with pytest.raises(ValueError):
        Polynomial(2, {(-1, 0): Fraction(1)})


def test_polynomial_is_immutable():
    p = poly_from_text("x")
    with pytest.raises(AttributeError):
        p.dimension = 3


# -- evaluation --------------------------------------------------------------

def test_eval_rational_zero_case():
    p = poly_from_text("x^2 + y^2")
    assert p.eval_rational([0, 0]) == 0


def test_eval_rational_direct_substitution():
    p = poly_from_text("x^2 + y^2")
    assert p.eval_rational([3, 4]) == 25


def test_eval_rational_lie_derivative_witness():
    # -2x^2 + 2x^2 y - 2y^2 at (10, 2):
    # term by term, -2*100 + 2*100*2 - 2*4 = -200 + 400 - 8 = 192.
    p = poly_from_text("-2*x^2 + 2*x^2*y - 2*y^2")
    assert p.eval_rational([10, 2]) == 192


def test_eval_rational_dimension_mismatch():
    with pytest.raises(ValueError):
        poly_from_text("x").eval_rational([1, 2, 3])


def test_eval_float_cases():
    assert parse_polynomial("x", ["x"]).eval_float([7.5]) == 7.5
    assert poly_from_text("x*y").eval_float([2.0, 3.0]) == 6.0
    assert poly_from_text("x^2 + y^2").eval_float([1.0, 1.0]) == 2.0


def test_eval_float_batch_matches_scalar():
    p = poly_from_text("0.5*x^3 - 2*x*y + y^2")
    pts = np.array([[1.0, 2.0], [-3.0, 0.5], [0.0, 0.0]])
    batch = p.eval_float_batch(pts)
    for row, expected in zip(pts, batch):
        assert p.eval_float(list(row)) == pytest.approx(expected, rel=1e-15)


# -- differentiation ---------------------------------------------------------

def test_partial_simple():
    p = poly_from_text("x^2 + y^2")
    assert p.partial(0) == poly_from_text("2*x")


def test_partial_cross_term():
    assert poly_from_text("x^2*y").partial(1) == poly_from_text("x^2")


def test_partial_constant_is_zero():
    assert poly_from_text("5").partial(0).is_zero


def test_partial_index_out_of_range():
    with pytest.raises(ValueError):
        poly_from_text("x").partial(2)


# -- parsing ------------------------------------------------------------------

def test_parse_planar_field_component():
    p = parse_polynomial("-x + x*y", ["x", "y"])
    assert p == Polynomial(2, {(1, 0): -1, (1, 1): 1})


def test_parse_zero():
    assert parse_polynomial("0", ["x"]).is_zero


def test_parse_decimal_coefficient_is_exact():
    p = parse_polynomial("-3*x - 0.1*x*y^3", ["x", "y", "z"])
    assert p == Polynomial(
        3, {(1, 0, 0): -3, (1, 3, 0): Fraction(-1, 10)}
    )


def test_parse_reports_location():
    with pytest.raises(ParseError) as err:
        parse_polynomial("x +\n* y", ["x", "y"])
    assert err.value.line == 2


def test_parse_unknown_identifier():
    with pytest.raises(ParseError, match="unknown identifier"):
        parse_polynomial("x + w", ["x", "y"])


def test_parse_rejects_bad_exponents():
    with pytest.raises(ParseError):
        parse_polynomial("x^-2", ["x"])
    with pytest.raises(ParseError):
        parse_polynomial("x^0.5", ["x"])
    with pytest.raises(ParseError):
        parse_polynomial("x^y", ["x", "y"])


def test_parse_requires_explicit_multiplication():
    with pytest.raises(ParseError):
        parse_polynomial("2 x", ["x"])


def test_unary_minus_binds_below_power():
    assert parse_polynomial("-x^2", ["x"]).eval_rational([3]) == -9


def test_parentheses_and_nesting():
    p = parse_polynomial("(x + y)^2 - (x - y)^2", ["x", "y"])
    assert p == poly_from_text("4*x*y")


# -- printing -----------------------------------------------------------------

def test_format_rational_decimal_cases():
    assert format_rational(Fraction(1, 10)) == "0.1"
    assert format_rational(Fraction(-3, 4)) == "-0.75"
    assert format_rational(Fraction(7)) == "7"
    assert format_rational(Fraction(1, 3)) == "1/3"


def test_canonical_text_order_and_signs():
    p = poly_from_text("y^2 - x + 2*x^2*y")
    assert p.to_text(["x", "y"]) == "2*x^2*y + y^2 - x"


def test_zero_prints_as_zero():
    assert Polynomial.zero(2).to_text() == "0"


# -- properties ---------------------------------------------------------------

@given(poly_pairs(), st.data())
def test_eval_is_ring_homomorphism(pair, data):
    p, q = pair
    point = [
        data.draw(st.fractions(min_value=-50, max_value=50))
        for _ in range(p.dimension)
    ]
    assert (p + q).eval_rational(point) == p.eval_rational(point) + q.eval_rational(point)
    assert (p * q).eval_rational(point) == p.eval_rational(point) * q.eval_rational(point)


@given(poly_pairs())
def test_partial_is_linear_and_satisfies_product_rule(pair):
    p, q = pair
    for i in range(p.dimension):
        assert (p + q).partial(i) == p.partial(i) + q.partial(i)
        assert (p * q).partial(i) == p.partial(i) * q + p * q.partial(i)


@given(polynomials())
def test_print_parse_round_trip(p):
    names = default_var_names(p.dimension)
    assert parse_polynomial(p.to_text(names), names) == p


@settings(max_examples=50)
@given(polynomials(max_degree=6), st.data())
def test_float_and_rational_evaluation_agree(p, data):
    point = [
        data.draw(st.integers(-1000, 1000)) / 16 for _ in range(p.dimension)
    ]
    exact = p.eval_rational([Fraction(v) for v in point])
    approx = p.eval_float(point)
    assert approx == pytest.approx(float(exact), rel=1e-12, abs=1e-30)


def test_squared_norm():
    assert squared_norm(3) == parse_polynomial("x^2 + y^2 + z^2", ["x", "y", "z"])


def test_float_to_fraction_exactness():
    assert float_to_fraction(0.5) == Fraction(1, 2)
    assert float_to_fraction(0.1) == Fraction(3602879701896397, 36028797018963968)
    with pytest.raises(ValueError):
        float_to_fraction(float("nan"))
