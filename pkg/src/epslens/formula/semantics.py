# epslens/formula/semantics.py
"""Finite structures and formula evaluation over them."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from epslens.contracts import (
    DimensionMismatchError,
    EnvelopeError,
    ShapeMismatchError,
    SortMismatchError,
    StructureDocument,
    UnassignedVariableError,
    ValueKind,
)
from epslens.envelopes import CompactEnvelope, apply_connective, envelope_propagate
from epslens.formula.syntax import (
    Apply,
    Atomic,
    Const,
    Formula,
    Language,
    Node,
    PredicateSymbol,
    Quantifier,
)
from epslens.stability import WeightedBipartiteStructure
from epslens.value_space import (
    ValuePoint,
    ValueSpace,
    encode_values,
    value_distance_array,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteStructure:
    sorts: Mapping[str, tuple[str, ...]]
    language: Language
    tables: Mapping[str, Mapping[tuple[str, ...], ValuePoint]]
    # metric for finite-metric predicates
    value_space: ValueSpace | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for sort, carrier in self.sorts.items():
            if not carrier:
                raise SortMismatchError(f"sort {sort!r} has an empty carrier")
        for name, symbol in self.language.predicates.items():
            unknown = [s for s in symbol.sorts if s not in self.sorts]
            if unknown:
                raise SortMismatchError(f"predicate {name!r} uses undeclared sorts {unknown}")
            table = self.tables.get(name, {})
            for args in itertools.product(*(self.sorts[s] for s in symbol.sorts)):
                if args not in table:
                    raise ShapeMismatchError(f"predicate {name!r} has no value at {list(args)}")
                value = table[args]
                if not symbol.envelope.contains(value):
                    raise EnvelopeError(
                        f"predicate {name!r} value at {list(args)} lies outside its envelope"
                    )

    def carrier(self, sort: str) -> tuple[str, ...]:
        try:
            return self.sorts[sort]
        except KeyError:
            raise SortMismatchError(f"unknown sort {sort!r}") from None

    @classmethod
    def from_document(cls, doc: StructureDocument) -> FiniteStructure:
        space = ValueSpace.from_document(doc.value_space) if doc.value_space else None
        sorts = {name: tuple(labels) for name, labels in doc.sorts.items()}
        symbols: dict[str, PredicateSymbol] = {}
        tables: dict[str, dict[tuple[str, ...], ValuePoint]] = {}
        for name, pred in doc.predicates.items():
            table: dict[tuple[str, ...], ValuePoint] = {}
            for key, raw in pred.table.items():
                args = tuple(part.strip() for part in key.split(",")) if key else ()
                table[args] = _decode_table_value(pred.value_kind, raw, name)
            envelope = _declared_envelope(pred.value_kind, pred.envelope, pred.indices, table, space, name)
            symbols[name] = PredicateSymbol(
                name=name, sorts=tuple(pred.sorts), envelope=envelope, modulus=pred.modulus
            )
            tables[name] = table
        return cls(sorts=sorts, language=Language(symbols), tables=tables, value_space=space)


def _decode_table_value(kind: ValueKind, raw: float | int | list[float], name: str) -> ValuePoint:
    if kind is ValueKind.FINITE_METRIC:
        if isinstance(raw, list):
            raise ShapeMismatchError(f"predicate {name!r}: finite-metric values are point indices")
        return ValuePoint.finite(int(raw))
    if kind is ValueKind.SUP_VECTOR:
        coords = raw if isinstance(raw, list) else [float(raw)]
        return ValuePoint.vector(coords)
    if isinstance(raw, list):
        raise ShapeMismatchError(f"predicate {name!r}: real predicate got a vector value")
    return ValuePoint.real(float(raw))


def _declared_envelope(
    kind: ValueKind,
    spans: Sequence[tuple[float, float]] | None,
    indices: Sequence[int] | None,
    table: Mapping[tuple[str, ...], ValuePoint],
    space: ValueSpace | None,
    name: str,
) -> CompactEnvelope:
    if kind is ValueKind.FINITE_METRIC:
        if space is None:
            raise EnvelopeError(f"predicate {name!r} is finite-metric but no value_space is given")
        chosen = indices if indices is not None else range(space.size)
        return CompactEnvelope.finite(space, chosen)
    if spans is None:
        # tightest box around the table values
        if not table:
            raise EnvelopeError(f"predicate {name!r} has neither an envelope nor values")
        dim = len(next(iter(table.values())).coords)
        spans = [
            (min(v.coords[i] for v in table.values()), max(v.coords[i] for v in table.values()))
            for i in range(dim)
        ]
    if kind is ValueKind.REAL:
        if len(spans) != 1:
            raise EnvelopeError(f"predicate {name!r}: real envelope needs exactly one interval")
        return CompactEnvelope.interval(*spans[0])
    return CompactEnvelope.box(spans)


Valuation = Mapping[str, str]


def _evaluate(node: Node, structure: FiniteStructure, valuation: Valuation) -> ValuePoint:
    if isinstance(node, Atomic):
        args: list[str] = []
        for term in node.args:
            if isinstance(term, Const):
                args.append(term.label)
            elif term.name in valuation:
                args.append(valuation[term.name])
            else:
                raise UnassignedVariableError(f"free variable {term.name!r} has no value")
        table = structure.tables[node.predicate]
        try:
            return table[tuple(args)]
        except KeyError:
            raise SortMismatchError(
                f"{node.predicate}({', '.join(args)}): arguments outside the carriers"
            ) from None
    if isinstance(node, Apply):
        values = [_evaluate(child, structure, valuation) for child in node.children]
        return apply_connective(node.connective, values, structure.value_space)
    if node.sort is None:
        # bound variable does not occur: quantifying over a nonempty carrier is the identity
        return _evaluate(node.body, structure, valuation)
    best: float | None = None
    for label in structure.carrier(node.sort):
        inner = dict(valuation)
        inner[node.variable] = label
        value = _evaluate(node.body, structure, inner).value
        if best is None or (value > best if node.kind == "sup" else value < best):
            best = value
    assert best is not None
    return ValuePoint.real(best)


def evaluate_formula(
    formula: Formula, structure: FiniteStructure, valuation: Valuation | None = None
) -> ValuePoint:
    """Value of the formula under an assignment of carrier labels to its free variables."""
    valuation = dict(valuation or {})
    missing = [v for v in formula.free_variables if v not in valuation]
    if missing:
        raise UnassignedVariableError(f"free variables without a value: {missing}")
    for name in formula.free_variables:
        sort = formula.variable_sorts[name]
        if valuation[name] not in structure.carrier(sort):
            raise SortMismatchError(f"{valuation[name]!r} is not an element of sort {sort!r}")
    return _evaluate(formula.root, structure, valuation)


def infer_envelope(node: Node | Formula) -> CompactEnvelope:
    """Recompute the envelope bottom-up, independently of the cached values."""
    if isinstance(node, Formula):
        node = node.root
    if isinstance(node, Atomic):
        return node.envelope
    if isinstance(node, Quantifier):
        return infer_envelope(node.body)
    return envelope_propagate(node.connective, [infer_envelope(c) for c in node.children])


def result_space(formula: Formula, structure: FiniteStructure) -> ValueSpace:
    envelope = formula.envelope
    if envelope.kind is ValueKind.REAL:
        return ValueSpace.real()
    if envelope.kind is ValueKind.SUP_VECTOR:
        return ValueSpace.sup_vector(envelope.dim)
    if structure.value_space is None:
        raise DimensionMismatchError("finite-metric formula over a structure without value_space")
    return structure.value_space


def _valuations(
    variables: Sequence[str], sorts: Mapping[str, str], structure: FiniteStructure
) -> list[tuple[str, ...]]:
    return list(itertools.product(*(structure.carrier(sorts[v]) for v in variables)))


def diam_structure(formula: Formula, structure: FiniteStructure) -> float:
    """Exact max distance between values of the formula over all tuples; 0 for sentences."""
    if not formula.free_variables:
        return 0.0
    space = result_space(formula, structure)
    points = [
        _evaluate(formula.root, structure, dict(zip(formula.free_variables, labels)))
        for labels in _valuations(formula.free_variables, formula.variable_sorts, structure)
    ]
    values = encode_values(space, points)
    distances = value_distance_array(space, values[:, None, ...], values[None, :, ...])
    return float(distances.max())


def materialize_matrix(
    formula: Formula,
    structure: FiniteStructure,
    x: Sequence[str],
    y: Sequence[str],
    *,
    sorts: Mapping[str, str] | None = None,
) -> WeightedBipartiteStructure:
    """Table of the formula with x-tuples as rows and y-tuples as columns."""
    x, y = tuple(x), tuple(y)
    if set(x) & set(y):
        raise ShapeMismatchError(f"x and y share variables: {sorted(set(x) & set(y))}")
    leftover = [v for v in formula.free_variables if v not in x and v not in y]
    if leftover:
        raise ShapeMismatchError(f"free variables not in x or y: {leftover}")
    resolved: dict[str, str] = dict(formula.variable_sorts)
    for name, sort in (sorts or {}).items():
        if name in resolved and resolved[name] != sort:
            raise SortMismatchError(f"variable {name!r} has sort {resolved[name]!r}, not {sort!r}")
        resolved[name] = sort
    for name in x + y:
        if name not in resolved:
            if len(structure.sorts) != 1:
                raise SortMismatchError(f"cannot infer the sort of unused variable {name!r}")
            resolved[name] = next(iter(structure.sorts))

    space = result_space(formula, structure)
    row_tuples = _valuations(x, resolved, structure)
    col_tuples = _valuations(y, resolved, structure)
    grid = [
        [
            _evaluate(formula.root, structure, {**dict(zip(x, a)), **dict(zip(y, b))})
            for b in col_tuples
        ]
        for a in row_tuples
    ]
    logger.debug("materialized %dx%d matrix for %s", len(row_tuples), len(col_tuples), formula)
    return WeightedBipartiteStructure.from_points(
        rows=[",".join(a) for a in row_tuples],
        cols=[",".join(b) for b in col_tuples],
        space=space,
        grid=grid,
    )


__all__ = [
    "FiniteStructure",
    "diam_structure",
    "evaluate_formula",
    "infer_envelope",
    "materialize_matrix",
    "result_space",
]
