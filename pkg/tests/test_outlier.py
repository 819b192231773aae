import math

import numpy as np
import pytest

from edog.errors import DomainError
from edog.graph import Graph
from edog.metrics import betweenness
from edog.outlier import OdFeaturizer, class_count_stats, od_detect, od_edge_features

from conftest import random_graph

INJECTED = [(3, 8), (3, 10), (3, 12)]


def test_class_count_stats_examples():
    assert class_count_stats([1, 1, 2]) == (2.0, 1.5, 2.0, 1.0, 0.5)
    assert class_count_stats([1, 1, 1]) == (1.0, 3.0, 3.0, 0.0, 0.0)
    assert class_count_stats([]) == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_path_middle_log_betweenness():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    f = od_edge_features(g, np.zeros(3, dtype=int), betweenness(g), (1, 2))
    assert f.log_betweenness[0] == pytest.approx(math.log(1 + 1e-6), abs=1e-15)
    assert f.log_betweenness[1] == pytest.approx(math.log(1e-6), abs=1e-12)


def test_feature_dims_and_invariants():
    g = random_graph(20, 0.2, 2, 1, classes=3)
    fz = OdFeaturizer(g, g.labels, betweenness(g))
    x = fz.features(g.edges)
    assert x.shape == (g.num_edges, 12)
    for side in (0, 6):
        assert np.all(x[:, side + 3] <= x[:, side + 2])
        assert np.all(x[:, side] >= 1)
        assert np.all(x[:, side + 4] >= 0)
    assert OdFeaturizer(g, g.labels, betweenness(g), include_betweenness=False).features(g.edges).shape[1] == 10


def test_featurizer_matches_scalar_and_adds_hypothetical_edge():
    g = random_graph(15, 0.25, 2, 2, classes=3)
    btw = betweenness(g)
    fz = OdFeaturizer(g, g.labels, btw)
    non = next((u, v) for u in range(15) for v in range(u + 1, 15) if (u, v) not in g.edge_set)
    for pair in list(g.edges[:5]) + [non]:
        assert np.allclose(fz.features([pair])[0], od_edge_features(g, g.labels, btw, pair).as_array())
    g2 = g.with_edges([non])
    assert np.allclose(fz.features([non])[0][[0, 1, 2, 3, 4, 6, 7, 8, 9, 10]],
                       od_edge_features(g2, g.labels, btw, non).as_array()[[0, 1, 2, 3, 4, 6, 7, 8, 9, 10]])


def test_label_permutation_covariance():
    g = random_graph(20, 0.2, 2, 3, classes=3)
    btw = betweenness(g)
    relabel = np.array([2, 0, 1])[g.labels]
    a = OdFeaturizer(g, g.labels, btw).features(g.edges)
    b = OdFeaturizer(g, relabel, btw).features(g.edges)
    assert np.array_equal(a, b)


def test_injected_edges_score_higher(cliques):
    g = cliques.with_edges(INJECTED)
    s = od_detect(g, seed=0)
    mal = np.array([p in INJECTED for p in s.pairs])
    assert s.values[mal].mean() > s.values[~mal].mean()
    assert np.array_equal(s.values, od_detect(g, seed=0).values)


def test_symmetric_graph_scores_equal():
    ring = Graph.from_edges(10, [(i, (i + 1) % 10) for i in range(10)], features=np.ones((10, 2)),
                            labels=np.zeros(10, dtype=int))
    s = od_detect(ring, seed=0)
    assert np.allclose(s.values, s.values[0], atol=1e-12)


def test_needs_two_edges():
    g = Graph.from_edges(3, [(0, 1)], features=np.ones((3, 2)), labels=np.zeros(3, dtype=int))
    with pytest.raises(DomainError):
        od_detect(g, seed=0)
