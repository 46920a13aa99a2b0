from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epslens.contracts import DimensionMismatchError, EpslensError, HypothesisViolationError
from epslens.gluing import glue_postconditions, hypothesis_violation, lipschitz_glue, lipschitz_ratio


def test_two_point_glue_interpolates_between_anchors() -> None:
    h = lipschitz_glue([0.0, 1.0], [0.0, 1.0], delta=0.5, epsilon=0.1)
    assert h([0.0]) == 0.0
    assert h([1.0]) == 1.0
    assert h([0.75]) == pytest.approx(0.5)
    assert h([0.5]) == 0.0
    assert h.lipschitz_bound == 2.0
    assert h.sup_error == 0.0
    grid = np.linspace(-1.0, 2.0, 31).reshape(-1, 1)
    assert lipschitz_ratio(h, grid) <= h.lipschitz_bound + 1e-9


def test_far_points_fall_back_to_the_offset() -> None:
    h = lipschitz_glue([[0.0, 0.0], [1.0, 1.0]], [2.0, 5.0], delta=0.25, epsilon=0.1)
    assert h.offset == 2.0
    assert h([10.0, -3.0]) == 2.0
    assert h.anchor_sources == (0, 1)


def test_repeated_inputs_share_one_anchor() -> None:
    h = lipschitz_glue([0.0, 0.0, 1.0], [0.1, 0.3, 1.0], delta=0.5, epsilon=0.25)
    assert h.anchor_sources == (0, 2)
    assert h.sup_error == pytest.approx(0.2)


def test_violated_hypothesis_names_the_pair() -> None:
    with pytest.raises(HypothesisViolationError) as info:
        lipschitz_glue([0.0, 0.1], [0.0, 1.0], delta=0.5, epsilon=0.5)
    assert info.value.pair == (0, 1)
    g = np.array([[0.0], [0.1], [3.0]])
    assert hypothesis_violation(g, np.array([0.0, 0.2, 9.0]), 0.5, 0.5) is None


def test_zero_coordinate_inputs_need_a_nearly_constant_target() -> None:
    h = lipschitz_glue(np.zeros((3, 0)), [0.0, 0.1, 0.2], delta=1.0, epsilon=0.25)
    assert h.anchor_sources == (0,)
    assert h.sup_error == pytest.approx(0.2)
    with pytest.raises(HypothesisViolationError):
        lipschitz_glue(np.zeros((2, 0)), [0.0, 1.0], delta=1.0, epsilon=0.5)


@pytest.mark.parametrize(("delta", "epsilon"), [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_parameter_domains(delta: float, epsilon: float) -> None:
    with pytest.raises(EpslensError):
        lipschitz_glue([0.0], [0.0], delta=delta, epsilon=epsilon)


def test_shapes_are_checked() -> None:
    with pytest.raises(DimensionMismatchError):
        lipschitz_glue([0.0, 1.0], [0.0], delta=1.0, epsilon=1.0)
    h = lipschitz_glue([[0.0, 1.0]], [0.0], delta=1.0, epsilon=1.0)
    with pytest.raises(DimensionMismatchError):
        h([0.0])


_POINTS = st.lists(
    st.tuples(st.lists(st.integers(0, 4), min_size=2, max_size=2), st.integers(0, 10)),
    min_size=1,
    max_size=12,
)


@settings(max_examples=60, deadline=None)
@given(points=_POINTS, delta=st.sampled_from([0.5, 1.0, 1.5, 2.5]))
def test_glue_postconditions_on_filtered_instances(points: list[tuple[list[int], int]], delta: float) -> None:
    g = np.array([p for p, _ in points], dtype=float)
    f = np.array([v for _, v in points], dtype=float) / 10
    close = np.abs(g[:, None, :] - g[None, :, :]).max(axis=2) < delta
    spread = np.abs(f[:, None] - f[None, :])
    epsilon = float(spread[close].max()) + 0.05
    h = lipschitz_glue(g, f, delta, epsilon)
    assert h.sup_error <= epsilon + 1e-9
    assert glue_postconditions(h, g, f) == []
    values = h.evaluate_many(g)
    assert values.min() >= f.min() - 1e-9 and values.max() <= f.max() + 1e-9
    assert lipschitz_ratio(h, g) <= h.lipschitz_bound + 1e-9
