"""Graded noncommutative algebra of Heisenberg model operators and its text syntax."""

from .algebra import (
    DimensionError,
    EnvElement,
    OrderError,
    dilate,
    formal_adjoint,
    homogeneous_part,
    monomial_weight,
    multiply,
    op_involution,
    principal_part,
    to_source,
)
from .parser import (
    OperatorExpr,
    ParseError,
    SzegoTerm,
    format_expr,
    parse_operator,
    to_env,
)

__all__ = [
    "DimensionError",
    "EnvElement",
    "OperatorExpr",
    "OrderError",
    "ParseError",
    "SzegoTerm",
    "dilate",
    "format_expr",
    "formal_adjoint",
    "homogeneous_part",
    "monomial_weight",
    "multiply",
    "op_involution",
    "parse_operator",
    "principal_part",
    "to_env",
    "to_source",
]
