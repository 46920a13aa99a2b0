from __future__ import annotations

import pytest

from epslens.contracts import LawStatus
from epslens.laws import AuditContext, check_ramsey_subadditivity
from epslens.stability import AddPointwise, random_grid_structure, stability_profile, transform

TOL = 1e-9


def _epsilon_1(f) -> float:
    return stability_profile(f, 1).epsilon(1)


@pytest.mark.parametrize("block", range(10))
def test_first_profile_value_is_subadditive(block: int) -> None:
    for seed in range(block * 100, (block + 1) * 100):
        f = random_grid_structure(8, 8, seed=2 * seed)
        g = random_grid_structure(8, 8, seed=2 * seed + 1)
        total = transform(f, AddPointwise(g))
        assert _epsilon_1(total) <= _epsilon_1(f) + _epsilon_1(g) + TOL, seed


@pytest.mark.parametrize("seed", range(100))
def test_six_chains_of_a_sum_are_bounded_by_three_chains(seed: int) -> None:
    f = random_grid_structure(8, 8, seed=10_000 + 2 * seed)
    g = random_grid_structure(8, 8, seed=10_001 + 2 * seed)
    (outcome,) = check_ramsey_subadditivity(AuditContext(f=f, g=g, k=2))
    assert outcome.status is LawStatus.PASSED, outcome.to_dict()
    assert outcome.details["k_sum"] == 5
