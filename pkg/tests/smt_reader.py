"""Independent SMT-LIB2 script reader used to cross-check emitted queries.

Deliberately separate from the emitter: it reconstructs the polynomial sign
conditions of a script from scratch, so emitter bugs cannot hide.
"""

from __future__ import annotations

from fractions import Fraction

from lyasynth.poly import Polynomial
from lyasynth.verifier import parse_sexprs


def _term_to_poly(node, var_index: dict[str, int], dim: int) -> Polynomial:
    if isinstance(node, str):
        if node in var_index:
            return Polynomial.variable(dim, var_index[node])
        return Polynomial.constant(dim, Fraction(node))
    head = node[0]
    args = [_term_to_poly(a, var_index, dim) for a in node[1:]]
    if head == "+":
        out = args[0]
        for a in args[1:]:
            out = out + a
        return out
    if head == "*":
        out = args[0]
        for a in args[1:]:
            out = out * a
        return out
    if head == "-":
        if len(args) == 1:
            return -args[0]
        out = args[0]
        for a in args[1:]:
            out = out - a
        return out
    if head == "/":
        num, den = args
        if den.total_degree != 0:
            raise ValueError("division by a non-constant")
        return num * (Fraction(1) / den.constant_term)
    raise ValueError(f"unsupported term head {head!r}")


def read_script(script: str) -> tuple[list[str], list[tuple[str, Polynomial]]]:
    """Variable names and the asserted sign conditions (op, polynomial)
    with each condition normalized to `poly op 0`."""
    var_names: list[str] = []
    conditions: list[tuple[str, Polynomial]] = []
    exprs = parse_sexprs(script)
    for expr in exprs:
        if not isinstance(expr, list) or not expr:
            continue
        if expr[0] == "declare-const":
            var_names.append(expr[1])
    var_index = {name: i for i, name in enumerate(var_names)}
    dim = len(var_names)
    for expr in exprs:
        if not isinstance(expr, list) or not expr or expr[0] != "assert":
            continue
        body = expr[1]
        clauses = body[1:] if body[0] == "and" else [body]
        for clause in clauses:
            op, lhs, rhs = clause[0], clause[1], clause[2]
            poly = _term_to_poly(lhs, var_index, dim) - _term_to_poly(rhs, var_index, dim)
            conditions.append((op, poly))
    return var_names, conditions
