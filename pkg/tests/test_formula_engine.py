from __future__ import annotations

import itertools
from collections.abc import Sequence

import pytest
from hypothesis import HealthCheck, given, reject, settings
from hypothesis import strategies as st

from epslens.contracts import (
    FormulaSyntaxError,
    GuardViolationError,
    PredicateDocument,
    SortMismatchError,
    SpaceDocument,
    StructureDocument,
    UnassignedVariableError,
    UnknownPredicateError,
    ValueKind,
)
from epslens.formula import (
    FiniteStructure,
    diam_structure,
    evaluate_formula,
    infer_envelope,
    materialize_matrix,
    parse_formula,
    print_formula,
)

CARRIER = ["a", "b", "c"]
D_TABLE = [0.0, 0.4, 1.0, 0.4, 0.0, 0.6, 1.0, 0.6, 0.0]


def _structure(d_values: Sequence[float] = D_TABLE) -> FiniteStructure:
    pairs = [f"{x},{y}" for x, y in itertools.product(CARRIER, CARRIER)]
    doc = StructureDocument(
        sorts={"S": CARRIER, "T": ["u", "w"]},
        predicates={
            "d": PredicateDocument(sorts=["S", "S"], envelope=[(0.0, 1.0)], table=dict(zip(pairs, d_values))),
            "v": PredicateDocument(
                sorts=["S"],
                value_kind=ValueKind.SUP_VECTOR,
                envelope=[(0.0, 1.0), (-1.0, 1.0)],
                table={"a": [0.0, -1.0], "b": [0.5, 0.0], "c": [1.0, 1.0]},
            ),
            "e": PredicateDocument(sorts=["T"], table={"u": 0.0, "w": 2.0}),
            "m": PredicateDocument(
                sorts=["S"],
                value_kind=ValueKind.FINITE_METRIC,
                table={"a": 0, "b": 1, "c": 2},
            ),
        },
        value_space=SpaceDocument(kind=ValueKind.FINITE_METRIC, table=[[0, 1, 2], [1, 0, 1], [2, 1, 0]]),
    )
    return FiniteStructure.from_document(doc)


@pytest.fixture
def structure() -> FiniteStructure:
    return _structure()


@pytest.mark.parametrize(
    "text",
    [
        "d(x, y)",
        "sup x:S . d(x, y)",
        "inf z:S . monus(d(x, z), d(z, y))",
        "max(d(x, y), scale[0.5](d(y, x)))",
        "dist(d(x, 'a'), 0.25)",
        "proj[1](v(x))",
        "sup x . 1.0",
        "dist(m(x), m(y))",
    ],
)
def test_golden_parse_print_round_trip(structure: FiniteStructure, text: str) -> None:
    formula = parse_formula(text, structure.language)
    assert str(formula) == text
    assert print_formula(parse_formula(str(formula), structure.language).root) == text


def test_free_variables_are_ordered_by_first_occurrence(structure: FiniteStructure) -> None:
    formula = parse_formula("add(d(y, x), sup z:S . d(z, y))", structure.language)
    assert formula.free_variables == ("y", "x")
    assert formula.variable_sorts["y"] == "S"


def test_quantifier_over_a_signed_body_is_rejected(structure: FiniteStructure) -> None:
    with pytest.raises(GuardViolationError):
        parse_formula("sup x:S . sub(d(x, y), 1.0)", structure.language)


@pytest.mark.parametrize(
    ("text", "error"),
    [
        ("sup x:S d(x, y)", FormulaSyntaxError),
        ("d(x, y", FormulaSyntaxError),
        ("d(x, y) d(x, y)", FormulaSyntaxError),
        ("f(x)", UnknownPredicateError),
        ("d(x)", SortMismatchError),
        ("add(d(x, x), e(x))", SortMismatchError),
        ("sup x:T . d(x, y)", SortMismatchError),
        ("max(d(x, y))", FormulaSyntaxError),
    ],
)
def test_malformed_formulas_raise_typed_errors(structure: FiniteStructure, text: str, error: type[Exception]) -> None:
    with pytest.raises(error):
        parse_formula(text, structure.language)


def test_syntax_errors_carry_the_position(structure: FiniteStructure) -> None:
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("sup x:S d(x, y)", structure.language)
    assert info.value.position == 8


def test_evaluation_of_quantifiers(structure: FiniteStructure) -> None:
    sup = parse_formula("sup y:S . d(x, y)", structure.language)
    assert evaluate_formula(sup, structure, {"x": "a"}).value == 1.0
    inf = parse_formula("inf y:S . add(d(x, y), d(y, 'b'))", structure.language)
    assert evaluate_formula(inf, structure, {"x": "a"}).value == pytest.approx(0.4)


def test_unassigned_variables_are_reported(structure: FiniteStructure) -> None:
    formula = parse_formula("d(x, y)", structure.language)
    with pytest.raises(UnassignedVariableError):
        evaluate_formula(formula, structure, {"x": "a"})
    with pytest.raises(SortMismatchError):
        evaluate_formula(formula, structure, {"x": "a", "y": "u"})


def test_finite_metric_dist_uses_the_value_table(structure: FiniteStructure) -> None:
    formula = parse_formula("dist(m(x), m(y))", structure.language)
    assert evaluate_formula(formula, structure, {"x": "a", "y": "c"}).value == 2.0
    assert formula.envelope.hull() == ((0.0, 2.0),)


@pytest.mark.parametrize(
    "text",
    ["d(x, y)", "sup z:S . min(d(x, z), d(z, y))", "v(x)", "m(y)", "monus(d(x, y), d(y, 'c'))"],
)
def test_diam_structure_equals_the_materialized_diameter(structure: FiniteStructure, text: str) -> None:
    formula = parse_formula(text, structure.language)
    f = materialize_matrix(formula, structure, ["x"], ["y"], sorts={"x": "S", "y": "S"})
    assert f.shape == (3, 3)
    assert diam_structure(formula, structure) == pytest.approx(f.diameter)


def test_materialize_rejects_overlapping_variable_sets(structure: FiniteStructure) -> None:
    formula = parse_formula("d(x, y)", structure.language)
    with pytest.raises(Exception, match="share variables"):
        materialize_matrix(formula, structure, ["x", "y"], ["y"])


def test_sentences_have_zero_diameter(structure: FiniteStructure) -> None:
    formula = parse_formula("sup x:S . sup y:S . d(x, y)", structure.language)
    assert diam_structure(formula, structure) == 0.0


_ATOMS = st.sampled_from(["d(x, y)", "d(y, x)", "d(x, x)", "d(y, 'b')", "0.5", "1.0"])


def _extend(children: st.SearchStrategy[str]) -> st.SearchStrategy[str]:
    binary = st.tuples(st.sampled_from(["add", "sub", "max", "min", "monus", "dist"]), children, children).map(
        lambda t: f"{t[0]}({t[1]}, {t[2]})"
    )
    scaled = st.tuples(st.sampled_from([-2.0, -0.5, 0.0, 0.5, 2.0]), children).map(
        lambda t: f"scale[{t[0]!r}]({t[1]})"
    )
    quantified = st.tuples(st.sampled_from(["sup", "inf"]), st.sampled_from(["x", "y", "z"]), children).map(
        lambda t: f"{t[0]} {t[1]} . {t[2]}"
    )
    return st.one_of(binary, scaled, quantified)


_FORMULAS = st.recursive(_ATOMS, _extend, max_leaves=6)
_TABLES = st.lists(st.integers(0, 10).map(lambda v: v / 10), min_size=9, max_size=9)


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(text=_FORMULAS, values=_TABLES)
def test_every_evaluation_lies_inside_the_inferred_envelope(text: str, values: list[float]) -> None:
    structure = _structure(values)
    try:
        formula = parse_formula(text, structure.language)
    except GuardViolationError:
        reject()
    envelope = infer_envelope(formula)
    assert envelope.hull() == formula.envelope.hull()
    free = formula.free_variables
    for labels in itertools.product(CARRIER, repeat=len(free)):
        value = evaluate_formula(formula, structure, dict(zip(free, labels)))
        assert formula.envelope.contains(value), (text, labels, value)
    assert str(parse_formula(str(formula), structure.language)) == str(formula)
