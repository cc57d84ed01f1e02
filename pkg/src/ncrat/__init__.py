"""Regularity, boundedness and positivity of noncommutative rational functions.

The pipeline is: parse an expression (:mod:`ncrat.ncexpr`), realize it as
``c* L^{-1} b`` with a linear pencil (:mod:`ncrat.realization`), and decide
properties of the function from properties of the pencil
(:mod:`ncrat.ellipticity`) or from a sum-of-hermitian-squares search
(:mod:`ncrat.positivity`).  All numerical certificates come from the small
dense SDP solver in :mod:`ncrat.sdp`.
"""
from .linalg import Field
from .ncexpr import (Expr, MatrixPoint, OutsideDomain, ParseError, eval_mp, eval_strict,
                     format_expr, parse)
from .pencil import LinearPencil

__version__ = "0.1.0"

__all__ = [
    "Expr",
    "Field",
    "LinearPencil",
    "MatrixPoint",
    "OutsideDomain",
    "ParseError",
    "eval_mp",
    "eval_strict",
    "format_expr",
    "parse",
]
