from __future__ import annotations

from collections.abc import Callable, Iterator

import numpy as np
import pytest

from epslens.contracts import CoverMethod, EpslensError, ShapeMismatchError, SizeGuardExceeded
from epslens.definability import MedianDefinition, TypeFunction, build_definition
from epslens.stability import WeightedBipartiteStructure, half_graph
from epslens.typespace import (
    TwoLayerFixture,
    cover_rows,
    extension_audit,
    fs_level,
    random_fixture,
    symmetry_audit,
    verify_cover,
)


def _partitions(items: list[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for partition in _partitions(rest):
        yield [[head], *partition]
        for i in range(len(partition)):
            yield [*partition[:i], [head, *partition[i]], *partition[i + 1 :]]


def _brute_force_cover_size(dist: np.ndarray, epsilon: float) -> int:
    best = dist.shape[0]
    for partition in _partitions(list(range(dist.shape[0]))):
        if len(partition) < best and verify_cover(dist, partition, epsilon):
            best = len(partition)
    return best


def _column_table(values: list[float]) -> WeightedBipartiteStructure:
    return WeightedBipartiteStructure.from_array([[v] for v in values])


@pytest.fixture
def h4_fixture() -> TwoLayerFixture:
    return TwoLayerFixture(table=half_graph(4), m_rows=(0, 1, 2, 3), m_cols=(0, 2))


def test_fs_level_is_the_distance_to_the_nearest_marked_row() -> None:
    table = WeightedBipartiteStructure.from_array([[0.0, 0.0], [1.0, 1.0], [0.2, 0.1]])
    fx = TwoLayerFixture(table=table, m_rows=(0, 1), m_cols=(0,))
    assert fs_level(fx, 0) == 0.0
    assert fs_level(fx, 2) == pytest.approx(0.2)
    with pytest.raises(EpslensError, match="out of range"):
        fs_level(fx, 3)


def test_fixture_validation() -> None:
    table = half_graph(3)
    with pytest.raises(ShapeMismatchError):
        TwoLayerFixture(table=table, m_rows=(), m_cols=(0,))
    with pytest.raises(ShapeMismatchError):
        TwoLayerFixture(table=table, m_rows=(0, 0), m_cols=(0,))
    with pytest.raises(ShapeMismatchError):
        TwoLayerFixture(table=table, m_rows=(0,), m_cols=(3,))
    fx = TwoLayerFixture.from_labels(table, ["a2", "a0"], ["b1"])
    assert fx.m_rows == (2, 0)
    doc = fx.to_document("h3.csv")
    assert doc.m_rows == ["a2", "a0"] and doc.m_cols == ["b1"]
    m = fx.m_structure
    assert m.rows == ("a2", "a0") and m.cols == ("b1",)
    assert m.data.tolist() == [[0.0], [1.0]]


def test_random_fixture_marks_the_leading_block() -> None:
    fx = random_fixture(4, 3, extra_rows=1, extra_cols=2, seed=7)
    assert fx.table.shape == (5, 5)
    assert fx.m_rows == (0, 1, 2, 3) and fx.m_cols == (0, 1, 2)
    assert all(fs_level(fx, a) == 0.0 for a in fx.m_rows)


def test_extension_audit_measures_m_and_n_errors(h4_fixture: TwoLayerFixture) -> None:
    m = h4_fixture.m_structure
    definition, error = build_definition(m, TypeFunction.realized(m, 1), 0.25, 0.2, 0.1)
    assert error == 0.0
    assert definition.row_labels == ("a1",)

    own = extension_audit(h4_fixture, definition, 1, 0.1, 0.25)
    assert own.n_error == 0.0 and own.bound_holds

    other = extension_audit(h4_fixture, definition, 2, 0.1, 0.25)
    assert other.m_error == 0.0
    assert other.n_error == 1.0
    assert other.bound == pytest.approx(0.35)
    assert not other.bound_holds
    assert other.to_dict()["row"] == "a2"


def test_extension_audit_needs_the_definition_rows(h4_fixture: TwoLayerFixture) -> None:
    definition = MedianDefinition(row_labels=("elsewhere",), epsilon=0.1, sup_error=0.0)
    with pytest.raises(EpslensError, match="missing"):
        extension_audit(h4_fixture, definition, 0, 0.1, 0.1)


def test_symmetry_of_realized_types() -> None:
    fx = TwoLayerFixture(table=half_graph(4), m_rows=(0, 1, 2, 3), m_cols=(0, 1, 2, 3))
    m = fx.m_structure
    psi_p, _ = build_definition(m, TypeFunction.realized(m, 1), 0.25, 0.2, 0.1)
    mt = m.transpose()
    psi_q, _ = build_definition(mt, TypeFunction.realized(mt, 2), 0.25, 0.2, 0.1)
    assert psi_q.row_labels == ("b2",)
    report = symmetry_audit(fx, 1, psi_p, 0.1, 2, psi_q, 0.1, 0.25)
    assert report.realized_in_m
    assert report.psi_p_at_q == [1.0] and report.psi_q_at_p == [1.0]
    assert report.distance == 0.0
    assert report.bound == pytest.approx(0.2)
    assert report.to_dict()["bound_holds"] is True
    with pytest.raises(EpslensError, match="not realized"):
        symmetry_audit(fx, 9, psi_p, 0.1, 2, psi_q, 0.1, 0.25)


def test_exact_cover_is_minimal_and_greedy_is_not_smaller() -> None:
    f = _column_table([0.0, 3.0, 6.0, 9.0])
    exact = cover_rows(f, 1.5)
    assert exact.parts == ((0, 1), (2, 3))
    assert exact.diameters == (3.0, 3.0)
    assert exact.labels(f) == [["a0", "a1"], ["a2", "a3"]]
    greedy = cover_rows(f, 1.5, CoverMethod.GREEDY)
    assert greedy.size == 4
    assert greedy.method is CoverMethod.GREEDY


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_exact_cover_matches_brute_force(make_matrix: Callable[..., WeightedBipartiteStructure], seed: int) -> None:
    f = make_matrix(n=6, m=3, seed=seed)
    for epsilon in (0.12, 0.27, 0.42):
        exact = cover_rows(f, epsilon)
        assert exact.size == _brute_force_cover_size(f.row_distances, epsilon)
        assert cover_rows(f, epsilon, CoverMethod.GREEDY).size >= exact.size


def test_duplicate_rows_share_a_part() -> None:
    f = _column_table([0.0, 0.0, 5.0])
    assert cover_rows(f, 1.0).parts == ((0, 1), (2,))


def test_exact_cover_refuses_too_many_distinct_rows() -> None:
    f = _column_table([float(v) for v in range(11)])
    with pytest.raises(SizeGuardExceeded, match="use greedy"):
        cover_rows(f, 0.25)
    assert cover_rows(f, 0.25, max_rows=11).size == 11
    assert cover_rows(f, 1.0, CoverMethod.GREEDY).size == 6
    repeated = _column_table([0.0] * 12)
    assert cover_rows(repeated, 0.25).parts == (tuple(range(12)),)


def test_cover_parameters_and_verification() -> None:
    f = _column_table([0.0, 1.0])
    with pytest.raises(EpslensError):
        cover_rows(f, 0.0)
    dist = f.row_distances
    assert verify_cover(dist, [[0], [1]], 0.1)
    assert not verify_cover(dist, [[0]], 0.1)
    assert not verify_cover(dist, [[0, 1]], 0.1)
