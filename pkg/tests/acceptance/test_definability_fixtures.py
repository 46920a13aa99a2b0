from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pytest

from epslens.contracts import DefinitionStrategy
from epslens.definability import (
    InstabilityEvidence,
    OracleFailure,
    TypeFunction,
    WitnessSet,
    build_definition,
    find_witness_rows,
    glue_definition,
    verify_witness_set,
)
from epslens.gluing import lipschitz_ratio
from epslens.stability import WeightedBipartiteStructure, random_grid_structure

EPS, GAMMA, DELTA = 0.2, 0.3, 0.1
SIZE = 12
TOL = 1e-9


def first_valid_row(
    f: WeightedBipartiteStructure, p: TypeFunction, columns: Sequence[int], zeta: float
) -> int | None:
    dist = p.distances_to_rows(f)
    for a in range(dist.shape[0]):
        if not columns or dist[a, list(columns)].max() < zeta:
            return a
    return None


def _fixture(seed: int) -> tuple[WeightedBipartiteStructure, TypeFunction]:
    """Table plus a type within 0.05 of one of its rows; seeds divisible by 3 use a first-fit oracle."""
    rng = np.random.default_rng(seed)
    if seed % 2:
        # threshold-like tables: f(a, b) depends on a coarse comparison of hidden scores
        x, y = rng.random(SIZE), rng.random(SIZE)
        data = np.round(np.clip(x[:, None] - y[None, :] + 0.5, 0.0, 1.0) * 10) / 10
        f = WeightedBipartiteStructure.from_array(data)
    else:
        f = random_grid_structure(SIZE, SIZE, seed=seed)
    source = int(rng.integers(SIZE))
    noise = rng.choice([-0.05, 0.0, 0.05], size=SIZE)
    oracle = first_valid_row if seed % 3 == 0 else None
    p = TypeFunction.external(f, f.data[source] + noise, oracle=oracle)
    return f, p


@pytest.mark.parametrize("seed", range(100))
def test_construction_ends_in_one_of_the_declared_outcomes(seed: int) -> None:
    f, p = _fixture(seed)
    outcome = find_witness_rows(f, p, EPS, GAMMA, DELTA, max_rounds=30)
    if isinstance(outcome, InstabilityEvidence):
        assert outcome.chain.verify(EPS, strict=True)
        assert outcome.chain.min_discrepancy > EPS
        return
    if isinstance(outcome, OracleFailure):
        assert outcome.columns
        return
    assert isinstance(outcome, WitnessSet)
    assert verify_witness_set(f, p, outcome.rows, EPS, GAMMA, DELTA)

    definition = glue_definition(f, p, outcome)
    assert definition.sup_error <= 2 * EPS + GAMMA + TOL
    rng = np.random.default_rng(seed)
    for h in definition.coordinates:
        assert h.lipschitz_bound <= float(np.ptp(p.values)) / DELTA + TOL
        if h.anchors.shape[0] > 1:
            assert lipschitz_ratio(h, h.anchors) <= h.lipschitz_bound + TOL
        if h.dim:
            left = rng.random((1000, h.dim))
            right = rng.random((1000, h.dim))
            rise = np.abs(h.evaluate_many(left) - h.evaluate_many(right))
            run = np.abs(left - right).max(axis=1)
            assert np.all(rise <= h.lipschitz_bound * run + TOL)


@pytest.mark.parametrize("seed", range(20))
def test_realized_types_have_exact_median_definitions(seed: int) -> None:
    f = random_grid_structure(6, 6, seed=seed)
    row = seed % 6
    _, error = build_definition(f, TypeFunction.realized(f, row), 0.05, strategy=DefinitionStrategy.MEDIAN)
    assert error == 0.0
