"""Exact sparse multivariate polynomial arithmetic over the rationals.

A polynomial is a map from exponent tuples to ``Fraction`` coefficients.
All arithmetic on this representation is exact; floating point enters only
through the dedicated ``eval_float`` paths.  Zero coefficients are never
stored, so two polynomials are equal iff their term maps are equal.

  exponents = (2, 1)  with variables (x, y)  means  x^2 * y

The zero polynomial has an empty term map.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

# One exponent per variable; length equals the ambient dimension.
Monomial = tuple[int, ...]

Scalar = Union[int, Fraction]


class ParseError(ValueError):
    """Syntax or semantic error in a polynomial expression string."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


def _monomial_key(mono: Monomial) -> tuple:
    # Graded lexicographic: total degree first, then exponents.
    return (sum(mono), mono)


class Polynomial:
    """Immutable sparse polynomial with exact rational coefficients."""

    __slots__ = ("dimension", "terms", "_hash")

    def __init__(self, dimension: int, terms: Mapping[Monomial, Scalar] = ()):
        if dimension < 1:
            raise ValueError(f"dimension must be positive, got {dimension}")
        clean: dict[Monomial, Fraction] = {}
        for mono, coeff in dict(terms).items():
            mono = tuple(mono)
            if len(mono) != dimension:
                raise ValueError(
                    f"monomial {mono} has {len(mono)} exponents, expected {dimension}"
                )
            if any(e < 0 or not isinstance(e, int) for e in mono):
                raise ValueError(f"monomial {mono} has a negative or non-integer exponent")
            coeff = Fraction(coeff)
            if coeff != 0:
                clean[mono] = coeff
        object.__setattr__(self, "dimension", dimension)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dimension: int) -> "Polynomial":
        return cls(dimension, {})

    @classmethod
    def constant(cls, dimension: int, value: Scalar) -> "Polynomial":
        return cls(dimension, {(0,) * dimension: Fraction(value)})

    @classmethod
    def variable(cls, dimension: int, index: int) -> "Polynomial":
        if not 0 <= index < dimension:
            raise ValueError(f"variable index {index} out of range for dimension {dimension}")
        exps = [0] * dimension
        exps[index] = 1
        return cls(dimension, {tuple(exps): Fraction(1)})

    # -- basic queries -----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def total_degree(self) -> int:
        """Largest total degree among stored terms (0 for the zero polynomial)."""
        if not self.terms:
            return 0
        return max(sum(m) for m in self.terms)

    @property
    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.dimension, Fraction(0))

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in descending graded-lex order (the canonical print order)."""
        return sorted(self.terms.items(), key=lambda kv: _monomial_key(kv[0]), reverse=True)

    # -- arithmetic --------------------------------------------------------

    def _check_same_dimension(self, other: "Polynomial") -> None:
        if self.dimension != other.dimension:
            raise ValueError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}"
            )

    def __add__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.dimension, other)
        self._check_same_dimension(other)
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            out[mono] = out.get(mono, Fraction(0)) + coeff
        return Polynomial(self.dimension, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.dimension, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.dimension, other)
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = Fraction(other)
            return Polynomial(self.dimension, {m: v * c for m, v in self.terms.items()})
        self._check_same_dimension(other)
        out: dict[Monomial, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                mono = tuple(a + b for a, b in zip(ma, mb))
                out[mono] = out.get(mono, Fraction(0)) + ca * cb
        return Polynomial(self.dimension, out)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "Polynomial":
        if exponent < 0 or not isinstance(exponent, int):
            raise ValueError(f"exponent must be a non-negative integer, got {exponent}")
        result = Polynomial.constant(self.dimension, 1)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    def __hash__(self) -> int:
        h = object.__getattribute__(self, "_hash")
        if h is None:
            h = hash((self.dimension, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    # -- calculus ----------------------------------------------------------

    def partial(self, index: int) -> "Polynomial":
        """Exact partial derivative with respect to variable ``index``."""
        if not 0 <= index < self.dimension:
            raise ValueError(f"variable index {index} out of range for dimension {self.dimension}")
        out: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms.items():
            e = mono[index]
            if e == 0:
                continue
            dm = list(mono)
            dm[index] = e - 1
            out[tuple(dm)] = coeff * e
        return Polynomial(self.dimension, out)

    # -- evaluation --------------------------------------------------------

    def eval_rational(self, point: Sequence[Scalar]) -> Fraction:
        """Exact value at a rational point."""
        if len(point) != self.dimension:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.dimension}")
        values = [Fraction(v) for v in point]
        total = Fraction(0)
        for mono, coeff in self.terms.items():
            term = coeff
            for e, v in zip(mono, values):
                if e:
                    term *= v**e
            total += term
        return total

    def eval_float(self, point: Sequence[float]) -> float:
        """Round-to-nearest floating-point value at a float point."""
        if len(point) != self.dimension:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.dimension}")
        total = 0.0
        for mono, coeff in self.terms.items():
            term = float(coeff)
            for e, v in zip(mono, point):
                if e:
                    term *= v**e
            total += term
        return total

    def eval_float_batch(self, points: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation at an (m, n) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise ValueError(f"expected an (m, {self.dimension}) array, got shape {points.shape}")
        total = np.zeros(points.shape[0])
        for mono, coeff in self.terms.items():
            term = np.full(points.shape[0], float(coeff))
            for i, e in enumerate(mono):
                if e:
                    term *= points[:, i] ** e
            total += term
        return total

    # -- printing ----------------------------------------------------------

    def to_text(self, var_names: Sequence[str] | None = None) -> str:
        """Canonical text form, terms in descending graded-lex order.

        Coefficients whose denominator divides a power of 10 are printed as
        exact decimals (so the output re-parses to the same polynomial);
        other denominators fall back to a ``p/q`` form.
        """
        if var_names is None:
            var_names = default_var_names(self.dimension)
        if len(var_names) != self.dimension:
            raise ValueError("wrong number of variable names")
        if not self.terms:
            return "0"
        parts: list[str] = []
        for mono, coeff in self.sorted_terms():
            factors = []
            for name, e in zip(var_names, mono):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = format_rational(abs(coeff))
            if factors and mag == "1":
                body = "*".join(factors)
            elif factors:
                body = mag + "*" + "*".join(factors)
            else:
                body = mag
            if not parts:
                parts.append(body if coeff > 0 else "-" + body)
            else:
                parts.append(("+ " if coeff > 0 else "- ") + body)
        return " ".join(parts)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Polynomial({self.dimension}, {self.to_text()!r})"


def default_var_names(dimension: int) -> list[str]:
    if dimension <= 3:
        return ["x", "y", "z"][:dimension]
    return [f"x{i + 1}" for i in range(dimension)]


def format_rational(value: Fraction) -> str:
    """Exact decimal string when the denominator is 2^a * 5^b, else ``p/q``."""
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    d, twos = den, 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    fives = 0
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{num}/{den}"
    shift = max(twos, fives)
    digits = abs(num) * 2 ** (shift - twos) * 5 ** (shift - fives)
    text = str(digits).rjust(shift + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{text[:-shift]}.{text[-shift:]}"


# ---------------------------------------------------------------------------
# Expression parsing
#
# Grammar (infix over declared variable names):
#   expr   := term (('+' | '-') term)*
#   term   := factor ('*' factor)*
#   factor := '-' factor | power
#   power  := atom ('^' INTEGER)?
#   atom   := NUMBER | IDENT | '(' expr ')'
#
# '^' accepts only a non-negative integer literal.  Implicit multiplication
# is not allowed.  Decimal literals parse to exact rationals (0.1 -> 1/10).
# ---------------------------------------------------------------------------

_TOKEN_KINDS = ("number", "ident", "op", "end")


class _Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind: str, text: str, line: int, column: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append(_Token("number", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in "+-*^()":
            tokens.append(_Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, start_col)
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], var_names: Sequence[str]):
        self.tokens = tokens
        self.pos = 0
        self.dimension = len(var_names)
        self.var_index = {name: i for i, name in enumerate(var_names)}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.column)

    def parse(self) -> Polynomial:
        result = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise self.fail(f"unexpected {tok.text!r}")
        return result

    def expr(self) -> Polynomial:
        result = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> Polynomial:
        result = self.factor()
        while self.peek().kind == "op" and self.peek().text == "*":
            self.advance()
            result = result * self.factor()
        return result

    def factor(self) -> Polynomial:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return -self.factor()
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            tok = self.peek()
            if tok.kind == "op" and tok.text == "-":
                raise self.fail("exponent must be a non-negative integer literal", tok)
            if tok.kind != "number":
                raise self.fail("exponent must be an integer literal", tok)
            if "." in tok.text:
                raise self.fail("exponent must be an integer, not a decimal", tok)
            self.advance()
            return base ** int(tok.text)
        return base

    def atom(self) -> Polynomial:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Polynomial.constant(self.dimension, Fraction(tok.text))
        if tok.kind == "ident":
            self.advance()
            index = self.var_index.get(tok.text)
            if index is None:
                raise self.fail(f"unknown identifier {tok.text!r}", tok)
            return Polynomial.variable(self.dimension, index)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            closing = self.peek()
            if closing.kind != "op" or closing.text != ")":
                raise self.fail("expected ')'", closing)
            self.advance()
            return inner
        raise self.fail(f"expected a number, variable, or '(', got {tok.text!r}" if tok.kind != "end" else "unexpected end of expression", tok)


def parse_polynomial(text: str, var_names: Sequence[str]) -> Polynomial:
    """Parse an infix expression over ``var_names`` into a canonical Polynomial.

    Raises ParseError (with line/column) on syntax errors, unknown
    identifiers, and negative or non-integer exponents.
    """
    if len(set(var_names)) != len(var_names):
        raise ValueError("duplicate variable names")
    if not var_names:
        raise ValueError("at least one variable name is required")
    return _Parser(_tokenize(text), var_names).parse()


def squared_norm(dimension: int) -> Polynomial:
    """The polynomial x1^2 + ... + xn^2."""
    terms: dict[Monomial, Fraction] = {}
    for i in range(dimension):
        exps = [0] * dimension
        exps[i] = 2
        terms[tuple(exps)] = Fraction(1)
    return Polynomial(dimension, terms)


def float_to_fraction(value: float) -> Fraction:
    """The exact rational a finite binary float represents; error on NaN/inf."""
    if not np.isfinite(value):
        raise ValueError(f"cannot convert non-finite value {value!r} to a rational")
    return Fraction(float(value))
