from __future__ import annotations

import networkx as nx
import numpy as np
import pytest

from epslens.value_space import ValueSpace, embed_finite_metric, embedding_distortion


def _graph_metric(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    count = int(rng.integers(2, 13))
    graph = nx.gnp_random_graph(count, 0.3, seed=seed)
    graph.add_edges_from((i, i + 1) for i in range(count - 1) if not nx.has_path(graph, i, i + 1))
    for u, v in graph.edges:
        graph.edges[u, v]["weight"] = int(rng.integers(1, 6)) if seed % 2 else 1
    lengths = dict(nx.all_pairs_dijkstra_path_length(graph))
    return np.array([[lengths[i][j] for j in range(count)] for i in range(count)], dtype=float)


@pytest.mark.parametrize("seed", range(100))
def test_graph_metrics_embed_isometrically(seed: int) -> None:
    metric = _graph_metric(seed)
    space = ValueSpace.finite_metric(metric)
    base = seed % metric.shape[0]
    images = embed_finite_metric(space, base)
    assert embedding_distortion(space, images) <= 1e-12
    assert images[base].coords == (0.0,) * metric.shape[0]


def test_eight_point_graph_keeps_all_pairwise_distances() -> None:
    graph = nx.connected_watts_strogatz_graph(8, 3, 0.4, seed=3)
    lengths = dict(nx.all_pairs_shortest_path_length(graph))
    metric = np.array([[lengths[i][j] for j in range(8)] for i in range(8)], dtype=float)
    images = embed_finite_metric(ValueSpace.finite_metric(metric), 0)
    coords = np.array([p.coords for p in images])
    pairs = [(i, j) for i in range(8) for j in range(i + 1, 8)]
    assert len(pairs) == 28
    for i, j in pairs:
        assert np.abs(coords[i] - coords[j]).max() == metric[i, j]
