"""Link-prediction detector: GCN bilinear feature plus ALD features into a logistic layer.

Also hosts the plain ALD baseline (the same logistic head without the GCN
feature). Feature order for the head is fixed as
``[jaccard, common, distance, pref_attach, cosine, gnn]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .gcn import HIDDEN, embed_backward, embed_forward, propagation_matrix
from .graph import Graph, Pair
from .metrics import AldFeaturizer
from .numkit import binary_cross_entropy, glorot_uniform, rng, sgd_step, stable_sigmoid
from .scores import EdgeScores

EPOCHS = 500
LR = 0.01
NUM_ALD = 5


@dataclass
class LpModel:
    params: dict
    ald_mean: np.ndarray
    ald_std: np.ndarray
    use_gnn: bool = True
    seed: int = 0
    epochs: int = EPOCHS
    lr: float = LR


def sample_non_edges(g: Graph, k: int, gen: np.random.Generator) -> np.ndarray:
    """``k`` distinct uniformly random non-adjacent pairs, canonical order."""
    n = g.num_nodes
    if g.non_edge_count() < k:
        raise DomainError(f"graph too dense: need {k} non-edges, only {g.non_edge_count()} exist")
    if k == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edge_keys = g.edge_array[:, 0] * n + g.edge_array[:, 1]
    chosen = np.zeros(0, dtype=np.int64)
    while chosen.size < k:
        draw = gen.integers(0, n, size=(2 * (k - chosen.size) + 8, 2))
        u, v = draw.min(axis=1), draw.max(axis=1)
        keys = (u * n + v)[u != v]
        keys = keys[~np.isin(keys, edge_keys)]
        # keep first occurrences in draw order
        _, first = np.unique(np.concatenate([chosen, keys]), return_index=True)
        merged = np.concatenate([chosen, keys])[np.sort(first)]
        chosen = merged[:k]
    return np.column_stack([chosen // n, chosen % n])


def _standardize(feats: np.ndarray):
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def head_forward(params: dict, h2: np.ndarray | None, pairs: np.ndarray, ald_z: np.ndarray):
    """Link probability per pair plus the intermediates backprop needs."""
    w = params["w"]
    z = ald_z @ w[:NUM_ALD] + params["b"][0]
    gnn = None
    if h2 is not None:
        hu, hv = h2[pairs[:, 0]], h2[pairs[:, 1]]
        s = np.einsum("ij,jk,ik->i", hu, params["w_edge"], hv)
        gnn = stable_sigmoid(s)
        z = z + w[NUM_ALD] * gnn
    return stable_sigmoid(z), gnn


def lp_loss(params: dict, a_hat, x, pairs, ald_z, labels, use_gnn: bool = True) -> float:
    h2 = embed_forward(params["w1"], params["w2"], a_hat, x)[0] if use_gnn else None
    p, _ = head_forward(params, h2, pairs, ald_z)
    return float(np.mean(binary_cross_entropy(p, labels)))


def lp_loss_and_grad(params: dict, a_hat, x, pairs, ald_z, labels, use_gnn: bool = True):
    """Mean binary cross-entropy of the link head and its gradient."""
    h2 = cache = None
    if use_gnn:
        h2, cache = embed_forward(params["w1"], params["w2"], a_hat, x)
    p, gnn = head_forward(params, h2, pairs, ald_z)
    loss = float(np.mean(binary_cross_entropy(p, labels)))
    dz = (p - labels) / len(labels)
    grads = {"b": np.array([dz.sum()])}
    dw = np.zeros_like(params["w"])
    dw[:NUM_ALD] = ald_z.T @ dz
    if use_gnn:
        dw[NUM_ALD] = gnn @ dz
        ds = dz * params["w"][NUM_ALD] * gnn * (1.0 - gnn)
        hu, hv = h2[pairs[:, 0]], h2[pairs[:, 1]]
        w_edge = params["w_edge"]
        grads["w_edge"] = (hu * ds[:, None]).T @ hv
        d_h2 = np.zeros_like(h2)
        np.add.at(d_h2, pairs[:, 0], ds[:, None] * (hv @ w_edge.T))
        np.add.at(d_h2, pairs[:, 1], ds[:, None] * (hu @ w_edge))
        grads["w1"], grads["w2"] = embed_backward(cache, params["w2"], d_h2)
    grads["w"] = dw
    return loss, grads


def init_lp_params(feature_dim: int, seed: int, use_gnn: bool = True, hidden: int = HIDDEN) -> dict:
    gen = rng(seed, "lp_init")
    params = {"w": np.zeros(NUM_ALD + 1 if use_gnn else NUM_ALD), "b": np.zeros(1)}
    if use_gnn:
        params["w1"] = glorot_uniform(gen, feature_dim, hidden)
        params["w2"] = glorot_uniform(gen, hidden, hidden)
        w_edge = glorot_uniform(gen, hidden, hidden)
        params["w_edge"] = (w_edge + w_edge.T) / 2.0
    return params


def train_lp(g: Graph, seed: int, epochs: int = EPOCHS, lr: float = LR, use_gnn: bool = True) -> LpModel:
    """Full-batch SGD with a fresh balanced set of non-edges every epoch."""
    if g.num_edges < 1:
        raise DomainError("link prediction needs at least one edge")
    if g.non_edge_count() < g.num_edges:
        raise DomainError("graph too dense to sample as many non-edges as edges")
    feat = AldFeaturizer(g)
    positives = g.edge_array
    pos_feats = feat.features(positives)
    labels = np.r_[np.ones(len(positives)), np.zeros(len(positives))]
    gen = rng(seed, "lp_negatives")
    params = init_lp_params(g.feature_dim, seed, use_gnn)
    a_hat = propagation_matrix(g) if use_gnn else None
    mean, std = _standardize(pos_feats)
    for _ in range(epochs):
        negatives = sample_non_edges(g, len(positives), gen)
        pairs = np.vstack([positives, negatives])
        raw = np.vstack([pos_feats, feat.features(negatives)])
        mean, std = _standardize(raw)
        _, grads = lp_loss_and_grad(params, a_hat, g.features, pairs, (raw - mean) / std, labels, use_gnn)
        params = {k: sgd_step(v, grads[k], lr) for k, v in params.items()}
        if use_gnn:
            params["w_edge"] = (params["w_edge"] + params["w_edge"].T) / 2.0
    return LpModel(params, mean, std, use_gnn, seed, epochs, lr)


def link_probabilities(m: LpModel, g: Graph, targets, featurizer: AldFeaturizer | None = None) -> np.ndarray:
    pairs = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0)
    feat = featurizer or AldFeaturizer(g)
    ald_z = (feat.features(pairs) - m.ald_mean) / m.ald_std
    h2 = None
    if m.use_gnn:
        h2 = embed_forward(m.params["w1"], m.params["w2"], propagation_matrix(g), g.features)[0]
    return head_forward(m.params, h2, pairs, ald_z)[0]


def lp_pair_scores(m: LpModel, g: Graph, targets: list[Pair] | None = None,
                   featurizer: AldFeaturizer | None = None) -> EdgeScores:
    """Maliciousness = 1 - predicted link probability."""
    targets = list(g.edges if targets is None else targets)
    probs = link_probabilities(m, g, targets, featurizer)
    return EdgeScores(tuple(targets), 1.0 - probs, "lp" if m.use_gnn else "ald")


def lp_detect(g: Graph, seed: int, targets=None) -> EdgeScores:
    return lp_pair_scores(train_lp(g, seed), g, targets)


def ald_detector(g: Graph, seed: int, targets=None) -> EdgeScores:
    m = train_lp(g, seed, use_gnn=False)
    return lp_pair_scores(m, g, targets)
