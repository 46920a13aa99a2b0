from __future__ import annotations

import numpy as np
import pytest

from epslens.topometric import TopometricSpace, cb_analyze, derivative_closed, derivative_open

LINE = np.abs(np.subtract.outer(np.arange(4.0), np.arange(4.0)))


def _random_space(seed: int) -> tuple[TopometricSpace, float]:
    rng = np.random.default_rng(seed)
    count = int(rng.integers(2, 13))
    cells = rng.permutation(36)[:count]
    coords = np.stack([cells // 6, cells % 6], axis=1) / 5
    metric = np.abs(coords[:, None, :] - coords[None, :, :]).max(axis=2)
    full = (1 << count) - 1
    generators = [int(rng.integers(1, full + 1)) for _ in range(int(rng.integers(1, 5)))]
    space = TopometricSpace.build([f"x{i}" for i in range(count)], metric, generators)
    return space, float(rng.choice([0.0, 0.2, 0.4, 0.8]))


def test_canonical_examples() -> None:
    points = ["p0", "p1", "p2", "p3"]
    discrete = TopometricSpace.build(points, LINE, [], force_discrete=True)
    assert cb_analyze(discrete, 0.5).ranks == (0, 0, 0, 0)
    indiscrete = TopometricSpace.build(points, LINE, [0b1111])
    assert cb_analyze(indiscrete, 0.5).kernel == 0b1111
    prefix = TopometricSpace.build(points, LINE, [0b0001, 0b0011, 0b0111])
    assert cb_analyze(prefix, 0.5).ranks == (3, 2, 1, 0)


@pytest.mark.parametrize("seed", range(50))
def test_open_and_closed_derivatives_agree_on_random_spaces(seed: int) -> None:
    space, epsilon = _random_space(seed)
    report = cb_analyze(space, epsilon)
    assert len(report.levels) - 1 <= len(space.points)
    for level in report.levels:
        assert derivative_open(space, level, epsilon) == derivative_closed(space, level, epsilon)
    for closed in space.closed:
        assert derivative_open(space, closed, epsilon) == derivative_closed(space, closed, epsilon)
    assert cb_analyze(space, epsilon, derivative=derivative_closed).levels == report.levels
    ranked = [i for i, rank in enumerate(report.ranks) if rank is not None]
    assert sum(1 << i for i in ranked) == space.full & ~report.kernel
