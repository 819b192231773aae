"""Two-layer graph convolutional network with hand-written backprop.

The embedding half (``embed_forward`` / ``embed_backward``) is shared by the
node classifier here and by the link predictor and generation model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SchemaError
from .graph import Graph
from .numkit import Adam, PROB_FLOOR, cross_entropy, glorot_uniform, relu, rng, softmax

HIDDEN = 16
EPOCHS = 200
LR = 0.01
# above this many nodes the propagation matrix is kept sparse
SPARSE_THRESHOLD = 1500


def normalized_adjacency(g: Graph) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 as a dense matrix."""
    a = g.adjacency()
    a[np.diag_indices_from(a)] += 1.0
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def propagation_matrix(g: Graph):
    """Normalized adjacency, sparse for large graphs."""
    if g.num_nodes <= SPARSE_THRESHOLD:
        return normalized_adjacency(g)
    n = g.num_nodes
    e = g.edge_array
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    dinv = 1.0 / np.sqrt(g.degrees + 1.0)
    vals = dinv[rows] * dinv[cols]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass
class EmbedCache:
    ax: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    ah1: np.ndarray
    z2: np.ndarray
    a_hat: object


def embed_forward(w1: np.ndarray, w2: np.ndarray, a_hat, x: np.ndarray):
    """Return (H2, cache) with H2 = ReLU(A ReLU(A X W1) W2)."""
    ax = a_hat @ x
    z1 = ax @ w1
    h1 = relu(z1)
    ah1 = a_hat @ h1
    z2 = ah1 @ w2
    return relu(z2), EmbedCache(ax, z1, h1, ah1, z2, a_hat)


def embed_backward(cache: EmbedCache, w2: np.ndarray, d_h2: np.ndarray):
    """Gradients (dW1, dW2) given dLoss/dH2. The propagation matrix is symmetric."""
    d_z2 = d_h2 * (cache.z2 > 0)
    d_w2 = cache.ah1.T @ d_z2
    d_h1 = cache.a_hat @ (d_z2 @ w2.T)
    d_z1 = d_h1 * (cache.z1 > 0)
    d_w1 = cache.ax.T @ d_z1
    return d_w1, d_w2


@dataclass
class GcnModel:
    w1: np.ndarray
    w2: np.ndarray
    w_out: np.ndarray
    hidden: int = HIDDEN
    epochs: int = EPOCHS
    lr: float = LR
    seed: int = 0
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def num_classes(self) -> int:
        return self.w_out.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[0]

    def params(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "w_out": self.w_out}

    def to_dict(self) -> dict:
        return {
            "kind": "gcn",
            "hyper": {"hidden": self.hidden, "epochs": self.epochs, "lr": self.lr, "seed": self.seed},
            "weights": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
                        for k, v in self.params().items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GcnModel":
        try:
            weights = {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
                       for k, v in doc["weights"].items()}
            hyper = doc["hyper"]
            return cls(weights["w1"], weights["w2"], weights["w_out"], int(hyper["hidden"]),
                       int(hyper["epochs"]), float(hyper["lr"]), int(hyper["seed"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad model checkpoint: {exc}") from exc


def save_model(m: GcnModel, path) -> None:
    Path(path).write_text(json.dumps(m.to_dict()) + "\n", encoding="utf-8")


def load_model(path) -> GcnModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return GcnModel.from_dict(doc)


def init_gcn(feature_dim: int, num_classes: int, seed: int, hidden: int = HIDDEN) -> GcnModel:
    gen = rng(seed, "gcn_init")
    return GcnModel(glorot_uniform(gen, feature_dim, hidden), glorot_uniform(gen, hidden, hidden),
                    glorot_uniform(gen, hidden, num_classes), hidden=hidden, seed=seed)


def _check_dims(m: GcnModel, g: Graph) -> None:
    if g.feature_dim != m.feature_dim:
        raise DomainError(f"model expects {m.feature_dim} features, graph has {g.feature_dim}")


def forward_logits(params: dict, a_hat, x: np.ndarray):
    h2, cache = embed_forward(params["w1"], params["w2"], a_hat, x)
    return h2 @ params["w_out"], h2, cache


def gcn_forward(m: GcnModel, g: Graph, a_hat=None) -> np.ndarray:
    """Per-node class probability vectors, shape (n, c)."""
    _check_dims(m, g)
    if a_hat is None:
        a_hat = propagation_matrix(g)
    logits, _, _ = forward_logits(m.params(), a_hat, g.features)
    return softmax(logits, axis=1)


def classification_loss(params: dict, a_hat, x, labels, idx) -> float:
    logits, _, _ = forward_logits(params, a_hat, x)
    p = softmax(logits[idx], axis=1)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(idx)), labels[idx]], PROB_FLOOR))))


def classification_loss_and_grad(params: dict, a_hat, x, labels, idx):
    """Mean cross-entropy over nodes ``idx`` and its gradient per parameter."""
    logits, h2, cache = forward_logits(params, a_hat, x)
    p = softmax(logits[idx], axis=1)
    rows = np.arange(len(idx))
    loss = float(-np.mean(np.log(np.maximum(p[rows, labels[idx]], PROB_FLOOR))))
    d_logits = np.zeros_like(logits)
    dp = p.copy()
    dp[rows, labels[idx]] -= 1.0
    d_logits[idx] = dp / len(idx)
    d_wout = h2.T @ d_logits
    d_w1, d_w2 = embed_backward(cache, params["w2"], d_logits @ params["w_out"].T)
    return loss, {"w1": d_w1, "w2": d_w2, "w_out": d_wout}


def train_node_classifier(g: Graph, seed: int, hidden: int = HIDDEN, epochs: int = EPOCHS,
                          lr: float = LR, num_classes: int | None = None) -> GcnModel:
    """Full-batch Adam on the labeled training nodes."""
    if g.labels is None:
        raise DomainError("graph has no labels")
    mask = g.train_mask if g.train_mask is not None else g.labels >= 0
    idx = np.flatnonzero(mask & (g.labels >= 0))
    if idx.size == 0:
        raise DomainError("empty training set")
    c = num_classes or g.num_classes
    m = init_gcn(g.feature_dim, c, seed, hidden)
    m.epochs, m.lr = epochs, lr
    a_hat = propagation_matrix(g)
    params = m.params()
    opt = Adam(lr)
    history = []
    for _ in range(epochs):
        loss, grads = classification_loss_and_grad(params, a_hat, g.features, g.labels, idx)
        history.append(loss)
        params = opt.step(params, grads)
    history.append(classification_loss(params, a_hat, g.features, g.labels, idx))
    m.w1, m.w2, m.w_out = params["w1"], params["w2"], params["w_out"]
    m.loss_history = history
    return m


def argmax_first(p: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the smallest class id (numpy's behaviour)."""
    return np.argmax(p, axis=-1)


def predict_labels(m: GcnModel, g: Graph) -> np.ndarray:
    return argmax_first(gcn_forward(m, g))


def target_loss(m: GcnModel, g: Graph, v: int, y: int) -> float:
    if not 0 <= v < g.num_nodes:
        raise DomainError(f"node {v} out of range")
    if not 0 <= y < m.num_classes:
        raise DomainError(f"class {y} out of range")
    return cross_entropy(gcn_forward(m, g)[v], y)


class LocalEvaluator:
    """Class probabilities of one node after adding edges, without a full pass.

    A node's output only depends on its two-hop neighbourhood and the degrees of
    nodes in it, so only those rows are recomputed.
    """

    def __init__(self, m: GcnModel, g: Graph):
        _check_dims(m, g)
        self.m = m
        self.g = g
        self.xw1 = g.features @ m.w1
        self.base_neighbors = g.neighbors

    def probs(self, v: int, added=()) -> np.ndarray:
        extra: dict[int, list[int]] = {}
        for a, b in added:
            extra.setdefault(a, []).append(b)
            extra.setdefault(b, []).append(a)
        nbrs = self.base_neighbors

        def closed(u):
            return (u, *nbrs[u], *extra.get(u, ()))

        deg_cache: dict[int, float] = {}

        def dtilde(u):
            d = deg_cache.get(u)
            if d is None:
                d = deg_cache[u] = len(nbrs[u]) + len(extra.get(u, ())) + 1.0
            return d

        ring = closed(v)
        h1 = np.empty((len(ring), self.xw1.shape[1]))
        coef = np.empty(len(ring))
        for i, j in enumerate(ring):
            ks = closed(j)
            scale = 1.0 / np.sqrt(np.fromiter((dtilde(k) for k in ks), float, len(ks)))
            h1[i] = relu(scale @ self.xw1[list(ks)] / np.sqrt(dtilde(j)))
            coef[i] = 1.0 / np.sqrt(dtilde(j))
        z2 = (coef @ h1) / np.sqrt(dtilde(v)) @ self.m.w2
        return softmax(relu(z2) @ self.m.w_out)
