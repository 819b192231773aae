import itertools
import math

import networkx as nx
import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from edog.errors import DomainError
from edog.graph import Graph
from edog.metrics import (AldFeaturizer, adamic_adar, ald_features, auc_from_arrays, betweenness, common_neighbors,
                          heuristic_scores, katz_detector_scores, katz_matrix, roc_auc)
from edog.scores import EdgeScores

from conftest import random_graph


def brute_betweenness(n, edges):
    """Enumerate every simple path per pair and keep the shortest ones."""
    adj = {u: set() for u in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)

    def paths(s, t):
        out = []

        def walk(node, seen):
            if node == t:
                out.append(list(seen))
                return
            for w in adj[node]:
                if w not in seen:
                    walk(w, seen + [w])
        walk(s, [s])
        return out

    cb = np.zeros(n)
    for s, t in itertools.combinations(range(n), 2):
        ps = paths(s, t)
        if not ps:
            continue
        best = min(len(p) for p in ps)
        short = [p for p in ps if len(p) == best]
        for p in short:
            for w in p[1:-1]:
                cb[w] += 1.0 / len(short)
    return cb


def test_ald_triangle():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)], features=np.array([[1.0, 0], [1, 1], [0, 1]]))
    f = ald_features(g, (0, 1))
    assert (f.neighbor_similarity, f.common_neighbors, f.distance, f.preferential_attachment) == (1.0, 1, 2, 1)
    assert f.feature_similarity == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_ald_isolated_and_identical_features():
    g = Graph.from_edges(2, [], features=np.array([[0.3, 0.4], [0.3, 0.4]]))
    f = ald_features(g, (0, 1))
    assert (f.neighbor_similarity, f.common_neighbors, f.distance, f.preferential_attachment) == (0.0, 0, 10, 0)
    assert f.feature_similarity == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        ald_features(g, (1, 1))


def test_ald_existing_edge_never_at_distance_one():
    g = random_graph(30, 0.1, 3, 2)
    for u, v in g.edges:
        assert ald_features(g, (u, v)).distance >= 2


def test_featurizer_matches_scalar_version():
    g = random_graph(25, 0.15, 4, 6)
    fz = AldFeaturizer(g)
    pairs = list(g.edges[:20]) + [(0, 24), (3, 17), (5, 9)]
    pairs = [p for p in pairs if p[0] != p[1]]
    vec = fz.features(np.array(pairs))
    ref = np.array([ald_features(g, p).as_array() for p in pairs])
    assert np.allclose(vec, ref, atol=1e-12)


def test_cn_aa_examples():
    tri = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert common_neighbors(tri, (0, 1)) == 1
    assert adamic_adar(tri, (0, 1)) == pytest.approx(1 / math.log(2), abs=1e-12)
    stars = Graph.from_edges(6, [(0, 1), (0, 2), (3, 4), (3, 5)])
    assert common_neighbors(stars, (0, 3)) == 0 and adamic_adar(stars, (0, 3)) == 0
    cyc = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert common_neighbors(cyc, (0, 2)) == 2
    with pytest.raises(DomainError):
        common_neighbors(cyc, (2, 2))


def test_cn_aa_match_networkx():
    g = random_graph(20, 0.25, 1, 11)
    h = nx.Graph(list(g.edges))
    h.add_nodes_from(range(20))
    pairs = [(0, 5), (2, 7), (3, 19), (10, 11)]
    for (u, v, aa) in nx.adamic_adar_index(h, pairs):
        assert adamic_adar(g, (u, v)) == pytest.approx(aa, abs=1e-12)
        assert common_neighbors(g, (u, v)) == len(list(nx.common_neighbors(h, u, v)))
    s = heuristic_scores(g, "cn", pairs)
    assert np.allclose(s.values, [1 / (1 + common_neighbors(g, p)) for p in pairs])


def test_katz_single_edge_and_edgeless():
    k = katz_matrix(Graph.from_edges(2, [(0, 1)]), beta=0.5)
    assert k[0, 1] == pytest.approx(2 / 3, abs=1e-14)
    assert not katz_matrix(Graph.from_edges(4, []), beta=0.05).any()


def test_katz_triangle_series():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    a = g.adjacency()
    series = sum(0.1 ** l * np.linalg.matrix_power(a, l) for l in range(1, 21))
    assert np.allclose(katz_matrix(g, 0.1), series, atol=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_katz_random_series(seed):
    g = random_graph(10, 0.4, 1, seed)
    a = g.adjacency()
    series = sum(0.05 ** l * np.linalg.matrix_power(a, l) for l in range(1, 31))
    assert np.max(np.abs(katz_matrix(g, 0.05) - series)) <= 1e-8


def test_katz_divergence():
    g = Graph.from_edges(5, [(u, v) for u in range(5) for v in range(u + 1, 5)])
    with pytest.raises(DomainError, match="spectral radius"):
        katz_matrix(g, beta=0.3)


def test_katz_detector_bridge_and_symmetry():
    clique = [(u, v) for u in range(5) for v in range(u + 1, 5)]
    edges = clique + [(u + 5, v + 5) for u, v in clique] + [(0, 5)]
    s = katz_detector_scores(Graph.from_edges(10, edges))
    bridge = s[(0, 5)]
    assert all(bridge > s[e] for e in edges if e != (0, 5))
    assert np.all((s.values >= 0) & (s.values <= 1))
    ring = katz_detector_scores(Graph.from_edges(6, [(i, (i + 1) % 6) for i in range(6)]))
    assert np.allclose(ring.values, ring.values[0], atol=1e-15)


def test_betweenness_examples():
    assert betweenness(Graph.from_edges(3, [(0, 1), (1, 2)])).tolist() == [0.0, 1.0, 0.0]
    star = betweenness(Graph.from_edges(6, [(0, i) for i in range(1, 6)]))
    assert star[0] == math.comb(5, 2) and not star[1:].any()
    assert not betweenness(Graph.from_edges(4, list(itertools.combinations(range(4), 2)))).any()


def test_betweenness_brute_force_small_graphs():
    gen = np.random.default_rng(0)
    checked = 0
    while checked < 40:
        n = int(gen.integers(2, 8))
        edges = [p for p in itertools.combinations(range(n), 2) if gen.random() < 0.45]
        h = nx.Graph(edges)
        h.add_nodes_from(range(n))
        if not nx.is_connected(h):
            continue
        g = Graph.from_edges(n, edges)
        assert np.allclose(betweenness(g), brute_betweenness(n, edges), atol=1e-12)
        checked += 1


def test_betweenness_matches_networkx():
    g = random_graph(40, 0.08, 1, 3)
    h = nx.Graph(list(g.edges))
    h.add_nodes_from(range(40))
    ref = nx.betweenness_centrality(h, normalized=False)
    assert np.allclose(betweenness(g), [ref[i] for i in range(40)], atol=1e-9)


def test_auc_examples():
    assert auc_from_arrays([0.8, 0.6, 0.4], [True, False, True]) == 0.5
    assert auc_from_arrays([1, 1, 1, 1], [1, 0, 0, 1]) == 0.5
    assert auc_from_arrays([0.9, 0.1, 0.2], [1, 0, 0]) == 1.0
    with pytest.raises(DomainError):
        auc_from_arrays([0.1, 0.2], [1, 1])


def test_auc_against_pairwise_count_and_sklearn():
    gen = np.random.default_rng(5)
    for _ in range(20):
        vals = np.round(gen.random(40), 1)
        labels = gen.random(40) < 0.3
        labels[0], labels[1] = True, False
        pos, neg = vals[labels], vals[~labels]
        pairwise = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg) / (len(pos) * len(neg))
        got = auc_from_arrays(vals, labels)
        assert abs(got - pairwise) <= 1e-12
        assert abs(got - roc_auc_score(labels, vals)) <= 1e-12


def test_roc_auc_on_edge_scores():
    s = EdgeScores([(0, 1), (1, 2), (2, 3)], [0.8, 0.6, 0.4])
    assert roc_auc(s, [(1, 0), (3, 2)]) == 0.5
    with pytest.raises(DomainError):
        roc_auc(s, [(0, 3)])
