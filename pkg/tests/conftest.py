from __future__ import annotations

import csv
from collections.abc import Callable, Iterator, Sequence
from pathlib import Path

import numpy as np
import pytest

from epslens.settings import reset_settings_cache
from epslens.stability import WeightedBipartiteStructure, half_graph, random_grid_structure

ACCEPTANCE_PREFIX = "tests/acceptance/"


def _is_acceptance(nodeid: str) -> bool:
    return nodeid.split("::", 1)[0].startswith(ACCEPTANCE_PREFIX)


def pytest_collection_modifyitems(items: list[pytest.Item]) -> None:
    for item in items:
        if _is_acceptance(item.nodeid):
            item.add_marker("acceptance")
        else:
            item.add_marker("general_behavior")


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    for name in ("EPSLENS_SIZE_GUARD", "EPSLENS_SEARCH_NODE_BUDGET", "EPSLENS_EXACT_COVER_MAX_ROWS"):
        monkeypatch.delenv(name, raising=False)
    reset_settings_cache()
    yield
    reset_settings_cache()


@pytest.fixture
def h3() -> WeightedBipartiteStructure:
    return half_graph(3)


@pytest.fixture
def make_matrix() -> Callable[..., WeightedBipartiteStructure]:
    def _make_matrix(
        values: Sequence[Sequence[float]] | np.ndarray | None = None,
        *,
        n: int = 4,
        m: int = 4,
        seed: int = 0,
        steps: int = 10,
    ) -> WeightedBipartiteStructure:
        if values is None:
            return random_grid_structure(n, m, seed=seed, steps=steps)
        return WeightedBipartiteStructure.from_array(values)

    return _make_matrix


@pytest.fixture
def write_csv(tmp_path: Path) -> Callable[..., Path]:
    def _write_csv(name: str, rows: Sequence[Sequence[object]]) -> Path:
        path = tmp_path / name
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            for row in rows:
                writer.writerow(row)
        return path

    return _write_csv


@pytest.fixture
def write_matrix(write_csv: Callable[..., Path]) -> Callable[..., Path]:
    """Unlabelled numeric CSV of a 2-D array."""

    def _write_matrix(name: str, values: Sequence[Sequence[float]] | np.ndarray) -> Path:
        return write_csv(name, [[repr(float(v)) for v in row] for row in np.asarray(values)])

    return _write_matrix
