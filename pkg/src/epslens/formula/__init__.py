"""Continuous-logic formulas: parsing, envelopes and evaluation over finite structures."""

from epslens.formula.parser import parse_formula, tokenize
from epslens.formula.semantics import (
    FiniteStructure,
    diam_structure,
    evaluate_formula,
    infer_envelope,
    materialize_matrix,
    result_space,
)
from epslens.formula.syntax import Formula, Language, PredicateSymbol, print_formula

__all__ = [
    "FiniteStructure",
    "Formula",
    "Language",
    "PredicateSymbol",
    "diam_structure",
    "evaluate_formula",
    "infer_envelope",
    "materialize_matrix",
    "parse_formula",
    "print_formula",
    "result_space",
    "tokenize",
]
