import math

import numpy as np
import pytest

import edog.graphgen as gg
from edog.errors import DomainError
from edog.generators import two_cliques
from edog.graph import Graph, sample_subgraphs, two_hop_subgraph
from edog.graphgen import (GgdModel, Replay, edge_link_prob_lists, edge_link_probs, filter_edges, ggd_detect,
                           init_ggd_params, load_ggd, lp_filter_ggd, replay_averages, replay_loss,
                           replay_loss_and_grad, replay_probabilities, save_ggd, train_ggd, ggd_fit_detect)
from edog.metrics import roc_auc
from edog.numkit import finite_diff_grad, max_relative_error, rng
from edog.scores import EdgeScores

from conftest import random_graph

INJECTED = (0, 8)


@pytest.fixture(scope="module")
def bare_cliques():
    """Two 8-cliques with two bridges and one extra cross-clique edge."""
    return two_cliques(size=8, pendants=0, seed=0).with_edges([INJECTED])


def random_params(d, seed, hidden=4):
    gen = np.random.default_rng(seed)
    w = gen.standard_normal((hidden, hidden))
    return {"w1": gen.standard_normal((d, hidden)) * 0.7, "w2": gen.standard_normal((hidden, hidden)) * 0.7,
            "w": (w + w.T) / 2}


def test_entry_counts_hand_traced():
    g = Graph.from_edges(3, [(0, 1), (1, 2)], features=np.eye(3))
    params = random_params(3, 0)
    a, b, missing = (0, 1), (1, 2), (0, 2)
    lists = edge_link_prob_lists(params, g, [a, b, missing], order=[0, 1])
    assert [len(lists[a]), len(lists[b]), len(lists[missing])] == [1, 2, 2]
    replay = Replay(g.features, g.edge_array, np.array([0, 1]), np.array([a, b, missing]))
    assert replay.counts.tolist() == [1, 2, 2]


@pytest.mark.parametrize("seed", range(4))
def test_batched_replay_matches_reference(seed):
    g = random_graph(9, 0.35, 3, seed)
    params = random_params(3, seed)
    order = rng(seed, "order").permutation(g.num_edges)
    targets = list(g.edges) + [(0, 8), (1, 7)]
    targets = list(dict.fromkeys(t for t in targets))
    lists = edge_link_prob_lists(params, g, targets, order)
    replay = Replay(g.features, g.edge_array, order, np.array(targets))
    probs = replay_probabilities(params, replay)
    pos = {g.edges[o]: t for t, o in enumerate(order)}
    for j, t in enumerate(targets):
        expected = pos[t] + 1 if t in pos else g.num_edges
        assert len(lists[t]) == expected == replay.counts[j]
        got = probs[replay.mask[:, j] > 0, j]
        assert np.allclose(got, lists[t], atol=1e-13)
    assert np.allclose(replay_averages(params, replay), [np.mean(lists[t]) for t in targets], atol=1e-13)


def test_zero_weights_and_empty_sentinel():
    g = random_graph(8, 0.4, 3, 1)
    m = GgdModel({"w1": np.zeros((3, 16)), "w2": np.zeros((16, 16)), "w": np.zeros((16, 16))})
    sub = two_hop_subgraph(g, 0)
    targets = list(sub.to_parent(e) for e in sub.graph.edges)
    out = edge_link_probs(m, sub, targets, rng(0, "t"))
    assert all(v == 0.5 for v in out.values())
    assert np.all(ggd_detect(m, g).values == 0.5)
    lone = two_hop_subgraph(Graph.from_edges(3, [(1, 2)], features=np.ones((3, 2))), 0)
    m0 = GgdModel(init_ggd_params(2, 0))
    assert edge_link_probs(m0, lone, [], rng(0, "t")) == {}
    empty = Graph.from_edges(2, [], features=np.ones((2, 2)))
    replay = Replay(empty.features, empty.edge_array, np.zeros(0, dtype=int), np.array([(0, 1)]))
    assert replay_averages(m0.params, replay).tolist() == [0.5]


def test_target_outside_subgraph():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)], features=np.ones((6, 2)))
    m = GgdModel(init_ggd_params(2, 0))
    with pytest.raises(DomainError):
        edge_link_probs(m, two_hop_subgraph(g, 0), [(3, 4)], rng(0, "t"))


@pytest.mark.parametrize("chunked", [False, True])
@pytest.mark.parametrize("seed", range(3))
def test_gradient_check(seed, chunked, monkeypatch):
    g = random_graph(10 + seed, 0.3, 4, seed)
    params = random_params(4, seed + 10)
    order = rng(seed, "order").permutation(g.num_edges)
    non = [(u, v) for u in range(g.num_nodes) for v in range(u + 1, g.num_nodes) if (u, v) not in g.edge_set][:5]
    targets = np.array(list(g.edges) + non)
    labels = np.r_[np.ones(g.num_edges), np.zeros(len(non))]
    if chunked:
        monkeypatch.setattr(gg, "STACK_BUDGET", 3 * g.num_nodes ** 2)
    replay = Replay(g.features, g.edge_array, order, targets)
    loss, grads = replay_loss_and_grad(params, replay, labels)
    assert loss == pytest.approx(replay_loss(params, replay, labels), rel=1e-12)
    for name in params:
        def f(w, name=name):
            return replay_loss({**params, name: w}, replay, labels)
        assert max_relative_error(grads[name], finite_diff_grad(f, params[name])) < 1e-4, name


def test_initial_loss_is_ln2_per_pair():
    g = random_graph(10, 0.3, 3, 0)
    params = init_ggd_params(3, seed=0)
    assert not params["w"].any()
    targets = np.array(list(g.edges) + [(0, 9)])
    labels = np.r_[np.ones(g.num_edges), 0.0]
    replay = Replay(g.features, g.edge_array, np.arange(g.num_edges), targets)
    assert replay_loss(params, replay, labels) == pytest.approx(len(targets) * math.log(2), rel=1e-12)


@pytest.fixture(scope="module")
def trained(small_ba):
    return train_ggd(small_ba, seed=3)


def test_checkpoints_and_determinism(small_ba, trained):
    assert [e for e, _ in trained.checkpoints] == list(range(6, 16))
    assert len(trained.loss_history) == 15
    again = train_ggd(small_ba, seed=3, epochs=6)
    for k, v in again.checkpoints[0][1].items():
        assert np.array_equal(v, trained.checkpoints[0][1][k])
    for _, p in trained.checkpoints:
        assert np.array_equal(p["w"], p["w"].T)


def test_detect_covers_every_edge_and_averages_checkpoints(small_ba, trained):
    s = ggd_detect(trained, small_ba, seed=1)
    assert set(s.pairs) == set(small_ba.edges)
    assert np.all((s.values >= 0) & (s.values <= 1))
    per = [ggd_detect(GgdModel(p), small_ba, seed=1).values for _, p in trained.checkpoints]
    assert np.allclose(s.values, np.mean(per, axis=0), atol=1e-14)
    assert np.array_equal(s.values, ggd_detect(trained, small_ba, seed=1).values)


def test_every_edge_lies_in_a_subgraph(small_ba):
    subs = sample_subgraphs(small_ba)
    for u, v in small_ba.edges:
        assert subs[u].to_local((u, v)) is not None and subs[v].to_local((u, v)) is not None


def test_model_roundtrip(tmp_path, trained):
    save_ggd(trained, tmp_path / "g.json")
    back = load_ggd(tmp_path / "g.json")
    assert [e for e, _ in back.checkpoints] == [e for e, _ in trained.checkpoints]
    assert np.array_equal(back.checkpoints[-1][1]["w1"], trained.checkpoints[-1][1]["w1"])


def test_filter_edges():
    s = EdgeScores([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], [0.9, 0.5, 0.9, 0.1, 0.5])
    assert filter_edges(s) == [(0, 1), (2, 3), (1, 2)]
    # an oracle ranking that puts injected edges on top removes all of them
    injected = {(1, 2), (3, 4)}
    oracle = EdgeScores(s.pairs, [1.0 if p in injected else 0.0 for p in s.pairs])
    assert injected <= set(filter_edges(oracle))


def test_injected_edge_above_median(bare_cliques):
    s = ggd_fit_detect(bare_cliques, seed=0)
    assert s[INJECTED] > np.median(s.values)


def test_lp_filter_scores_original_edges(bare_cliques):
    s = lp_filter_ggd(bare_cliques, seed=0)
    assert set(s.pairs) == set(bare_cliques.edges)
    assert s.source == "lp+ggd"
    with pytest.raises(DomainError):
        lp_filter_ggd(Graph.from_edges(3, [(0, 1)], features=np.ones((3, 2))), seed=0)


@pytest.mark.slow
@pytest.mark.xfail(reason="on dense two-clique fixtures the LP filter strips half of each clique, "
                          "so the filtered model is weaker than plain GGD; see the decision ledger",
                   strict=False)
def test_lp_filter_stability(bare_cliques):
    plain = [roc_auc(ggd_fit_detect(bare_cliques, s), [INJECTED]) for s in range(5)]
    filtered = [roc_auc(lp_filter_ggd(bare_cliques, s), [INJECTED]) for s in range(5)]
    assert np.mean(filtered) >= np.mean(plain) - 0.05
