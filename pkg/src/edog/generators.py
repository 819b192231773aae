"""Seeded synthetic graphs and structure-correlated node attributes."""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .graph import Graph
from .numkit import rng, stable_sigmoid


def gen_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    rows, cols = np.triu_indices(n, k=1)
    keep = rng(seed, "erdos_renyi").random(rows.size) < p
    return Graph.from_edges(n, zip(rows[keep].tolist(), cols[keep].tolist()))


def gen_barabasi_albert(n: int, m: int, seed: int) -> Graph:
    """Preferential attachment grown from an (m+1)-clique."""
    if not 1 <= m < n:
        raise DomainError(f"need 1 <= m < n, got m={m}, n={n}")
    gen = rng(seed, "barabasi_albert")
    core = m + 1
    edges = [(u, v) for u in range(core) for v in range(u + 1, core)]
    # every edge endpoint appears once, so uniform draws are degree-proportional
    repeated = [x for e in edges for x in e]
    for new in range(core, n):
        chosen: list[int] = []
        while len(chosen) < m:
            pick = repeated[int(gen.integers(len(repeated)))]
            if pick not in chosen:
                chosen.append(pick)
        for old in chosen:
            edges.append((old, new))
            repeated.extend((old, new))
    return Graph.from_edges(n, edges)


def synth_annotate(g: Graph, dim: int = 20, rounds: int = 3, seed: int = 0) -> Graph:
    """Attach Bernoulli features and binary labels correlated with structure.

    Hidden vectors start standard normal and are smoothed ``rounds`` times by
    summing neighbours and renormalizing. Nodes whose neighbour sum is empty or
    zero keep their previous vector. Labels are the sign of the hidden-vector sum.
    """
    if g.feature_dim:
        raise DomainError("graph already carries features")
    gen = rng(seed, "synth_annotate")
    hidden = gen.standard_normal((g.num_nodes, dim))
    adj = g.adjacency()
    for _ in range(rounds):
        summed = adj @ hidden
        norms = np.linalg.norm(summed, axis=1)
        ok = norms > 0
        hidden = hidden.copy()
        hidden[ok] = summed[ok] / norms[ok, None]
    probs = stable_sigmoid(hidden)
    feats = (gen.random(probs.shape) < probs).astype(np.float64)
    labels = (hidden.sum(axis=1) > 0).astype(np.int64)
    return g.replace(features=feats, labels=labels)


def two_cliques(size: int = 7, bridges: int = 2, pendants: int = 2, dim: int = 20, signal: float = 0.15,
                seed: int = 0) -> Graph:
    """Two ``size``-cliques labeled 0 and 1, joined by ``bridges`` random cross edges.

    Every clique node also carries ``pendants`` leaves of its own class, which
    keeps the graph sparse enough for link-prediction sampling. Bit i of a
    class-c node is 1 with probability 0.5 + signal when i falls in the
    class's half of the feature vector, 0.5 - signal otherwise.
    """
    if size < 2 or pendants < 0 or not 0 <= bridges <= size * size:
        raise DomainError("need size >= 2, pendants >= 0 and 0 <= bridges <= size^2")
    gen = rng(seed, "two_cliques")
    edges = [(u, v) for base in (0, size) for u in range(base, base + size) for v in range(u + 1, base + size)]
    cross = gen.choice(size * size, size=bridges, replace=False)
    edges += [(int(c // size), size + int(c % size)) for c in cross]
    n = 2 * size * (1 + pendants)
    owner = np.r_[np.arange(2 * size), np.repeat(np.arange(2 * size), pendants)]
    edges += [(int(owner[leaf]), leaf) for leaf in range(2 * size, n)]
    labels = (owner >= size).astype(np.int64)
    half = np.arange(dim) < dim // 2
    probs = np.where((labels[:, None] == 0) == half[None, :], 0.5 + signal, 0.5 - signal)
    feats = (gen.random(probs.shape) < probs).astype(np.float64)
    return Graph.from_edges(n, edges).replace(features=feats, labels=labels)


def split_train(g: Graph, fraction: float, seed: int) -> Graph:
    """Mark a seeded random ``fraction`` of the labeled nodes as training nodes."""
    if g.labels is None:
        raise DomainError("graph has no labels to split")
    if not 0.0 < fraction <= 1.0:
        raise DomainError(f"train fraction must lie in (0, 1], got {fraction}")
    labeled = np.flatnonzero(g.labels >= 0)
    if labeled.size == 0:
        raise DomainError("graph has no labeled nodes")
    k = max(1, int(round(fraction * labeled.size)))
    chosen = rng(seed, "split_train").permutation(labeled)[:k]
    mask = np.zeros(g.num_nodes, dtype=bool)
    mask[chosen] = True
    return g.replace(train_mask=mask)
