"""Pairwise link heuristics, betweenness centrality and the AUC evaluator."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path
from scipy.stats import rankdata

from .errors import DomainError
from .graph import Graph, Pair, canonical
from .numkit import softmax
from .scores import EdgeScores

DISTANCE_CAP = 10
KATZ_BETA = 0.05


@dataclass(frozen=True)
class PairFeatures:
    neighbor_similarity: float
    common_neighbors: int
    distance: int
    preferential_attachment: int
    feature_similarity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.neighbor_similarity, self.common_neighbors, self.distance,
                         self.preferential_attachment, self.feature_similarity], dtype=np.float64)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def _distance_without(g: Graph, u: int, v: int, cap: int = DISTANCE_CAP) -> int:
    """Hop distance u -> v ignoring the edge (u, v); ``cap`` when farther or unreachable."""
    nbrs = g.neighbors
    seen = {u}
    frontier = [u]
    for depth in range(1, cap):
        nxt = []
        for a in frontier:
            for b in nbrs[a]:
                if b in seen or (a == u and b == v):
                    continue
                if b == v:
                    return depth
                seen.add(b)
                nxt.append(b)
        if not nxt:
            break
        frontier = nxt
    return cap


def ald_features(g: Graph, pair: Sequence[int]) -> PairFeatures:
    """The five anomaly-link-discovery features, with the pair's own edge removed."""
    u, v = int(pair[0]), int(pair[1])
    if u == v:
        raise DomainError("pair endpoints must differ")
    nu = set(g.neighbors[u]) - {v}
    nv = set(g.neighbors[v]) - {u}
    common = len(nu & nv)
    union = len(nu | nv)
    return PairFeatures(
        neighbor_similarity=common / union if union else 0.0,
        common_neighbors=common,
        distance=2 if common else _distance_without(g, u, v),
        preferential_attachment=len(nu) * len(nv),
        feature_similarity=_cosine(g.features[u], g.features[v]),
    )


class AldFeaturizer:
    """Vectorized ALD features for many pairs of one graph."""

    def __init__(self, g: Graph):
        self.g = g
        n = g.num_nodes
        e = g.edge_array
        self.adj = sp.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                                 shape=(n, n))
        self.deg = np.asarray(g.degrees, dtype=np.float64)
        norms = np.linalg.norm(g.features, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        self.unit = g.features / safe[:, None]
        self.unit[norms == 0] = 0.0
        dist = shortest_path(self.adj, unweighted=True, directed=False)
        dist[~np.isfinite(dist)] = DISTANCE_CAP
        self.dist = np.minimum(dist, DISTANCE_CAP)
        self._edge_cache: dict[Pair, np.ndarray] = {}

    def features(self, pairs: np.ndarray) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        u, v = pairs[:, 0], pairs[:, 1]
        if np.any(u == v):
            raise DomainError("pair endpoints must differ")
        common = np.asarray(self.adj[u].multiply(self.adj[v]).sum(axis=1)).ravel()
        linked = np.asarray(self.adj[u, v]).ravel() > 0
        du = self.deg[u] - linked
        dv = self.deg[v] - linked
        union = du + dv - common
        jacc = np.divide(common, union, out=np.zeros_like(common), where=union > 0)
        dist = self.dist[u, v].copy()
        cos = np.einsum("ij,ij->i", self.unit[u], self.unit[v])
        out = np.column_stack([jacc, common, dist, du * dv, cos])
        for i in np.flatnonzero(linked):
            key = (int(u[i]), int(v[i]))
            d = self._edge_cache.get(key)
            if d is None:
                d = self._edge_cache[key] = 2.0 if common[i] else float(_distance_without(self.g, *key))
            out[i, 2] = d
        return out


def common_neighbors(g: Graph, pair: Sequence[int]) -> int:
    u, v = int(pair[0]), int(pair[1])
    if u == v:
        raise DomainError("pair endpoints must differ")
    return len(set(g.neighbors[u]) & set(g.neighbors[v]))


def adamic_adar(g: Graph, pair: Sequence[int]) -> float:
    u, v = int(pair[0]), int(pair[1])
    if u == v:
        raise DomainError("pair endpoints must differ")
    total = 0.0
    for w in set(g.neighbors[u]) & set(g.neighbors[v]):
        d = g.degrees[w]
        if d > 1:
            total += 1.0 / np.log(d)
    return total


def spectral_radius_estimate(a: np.ndarray, iterations: int = 50) -> float:
    n = a.shape[0]
    if n == 0 or not a.any():
        return 0.0
    x = np.ones(n) / np.sqrt(n)
    est = 0.0
    for _ in range(iterations):
        y = a @ x
        est = float(np.linalg.norm(y))
        if est == 0:
            return 0.0
        x = y / est
    return est


def katz_matrix(g: Graph, beta: float = KATZ_BETA) -> np.ndarray:
    """(I - beta A)^-1 - I, the damped count of walks of every length >= 1."""
    a = g.adjacency()
    radius = spectral_radius_estimate(a)
    if beta <= 0 or beta * radius >= 1.0:
        raise DomainError(f"Katz beta={beta} diverges: estimated spectral radius {radius:.6g}, "
                          f"need beta < {1.0 / radius if radius else float('inf'):.6g}")
    n = g.num_nodes
    eye = np.eye(n)
    return np.linalg.solve(eye - beta * a, eye) - eye


def katz_detector_scores(g: Graph, beta: float = KATZ_BETA) -> EdgeScores:
    if not g.edges:
        return EdgeScores((), np.zeros(0), "katz")
    k = katz_matrix(g, beta)
    e = g.edge_array
    prob = softmax(k[e[:, 0], e[:, 1]])
    return EdgeScores(g.edges, 1.0 - prob, "katz")


def heuristic_scores(g: Graph, kind: str, pairs: Iterable[Pair] | None = None) -> EdgeScores:
    """CN / AA detectors: fewer shared neighbours means more suspicious."""
    pairs = list(g.edges if pairs is None else pairs)
    fn = {"cn": common_neighbors, "aa": adamic_adar}[kind]
    vals = np.array([1.0 / (1.0 + fn(g, p)) for p in pairs])
    return EdgeScores(tuple(pairs), vals, kind)


def betweenness(g: Graph) -> np.ndarray:
    """Brandes' algorithm, unnormalized, each unordered pair counted once."""
    n = g.num_nodes
    nbrs = g.neighbors
    cb = np.zeros(n)
    for s in range(n):
        stack = []
        preds = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    return cb / 2.0


def auc_from_arrays(values, labels) -> float:
    """Mann-Whitney AUC: P(positive outscores negative), ties count one half."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DomainError("AUC needs both malicious and benign pairs")
    ranks = rankdata(values)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(scores: EdgeScores, malicious: Iterable[Sequence[int]]) -> float:
    mal = {canonical(*p) for p in malicious}
    known = set(scores.pairs)
    missing = mal - known
    if missing:
        raise DomainError(f"{len(missing)} malicious pairs were not scored, e.g. {sorted(missing)[0]}")
    labels = np.array([p in mal for p in scores.pairs])
    return auc_from_arrays(scores.values, labels)
