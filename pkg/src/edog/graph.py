"""Undirected attributed graphs, two-hop subgraphs and the graph JSON format."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, MalformedInputError, SchemaError

Pair = tuple[int, int]


def canonical(u: int, v: int) -> Pair:
    u, v = int(u), int(v)
    if u == v:
        raise DomainError(f"self-loop ({u}, {v}) is not a valid pair")
    return (u, v) if u < v else (v, u)


def canonical_edges(pairs: Iterable[Sequence[int]], num_nodes: int) -> tuple[Pair, ...]:
    out = set()
    for pair in pairs:
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise SchemaError(f"edge ({u}, {v}) references a node outside 0..{num_nodes - 1}")
        if u == v:
            raise SchemaError(f"self-loop on node {u}")
        out.add((u, v) if u < v else (v, u))
    return tuple(sorted(out))


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with node features and optional labels.

    ``labels`` uses -1 for nodes without a label. ``edges`` is a sorted tuple of
    canonical ``(min, max)`` pairs.
    """

    num_nodes: int
    features: np.ndarray
    edges: tuple[Pair, ...]
    labels: np.ndarray | None = None
    train_mask: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise SchemaError(f"features must have shape ({self.num_nodes}, d), got {feats.shape}")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "edges", canonical_edges(self.edges, self.num_nodes))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (self.num_nodes,):
                raise SchemaError("labels must have one entry per node")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.train_mask is not None:
            mask = np.asarray(self.train_mask, dtype=bool)
            if mask.shape != (self.num_nodes,):
                raise SchemaError("train_mask must have one entry per node")
            mask.setflags(write=False)
            object.__setattr__(self, "train_mask", mask)

    @classmethod
    def from_edges(cls, num_nodes: int, edges, features=None, labels=None, train_mask=None) -> "Graph":
        if features is None:
            features = np.zeros((num_nodes, 0))
        return cls(num_nodes, features, tuple(edges), labels, train_mask)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        if self.labels is None or not np.any(self.labels >= 0):
            return 0
        return max(2, int(self.labels.max()) + 1)

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.edges:
            arr = np.asarray(self.edges)
            np.add.at(deg, arr[:, 0], 1)
            np.add.at(deg, arr[:, 1], 1)
        deg.setflags(write=False)
        return deg

    @cached_property
    def edge_array(self) -> np.ndarray:
        arr = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        if self.edges:
            e = self.edge_array
            a[e[:, 0], e[:, 1]] = 1.0
            a[e[:, 1], e[:, 0]] = 1.0
        return a

    def has_edge(self, u: int, v: int) -> bool:
        return canonical(u, v) in self.edge_set

    def with_edges(self, added: Iterable[Sequence[int]]) -> "Graph":
        return Graph(self.num_nodes, self.features, self.edges + tuple(tuple(p) for p in added),
                     self.labels, self.train_mask)

    def without_edges(self, removed: Iterable[Sequence[int]]) -> "Graph":
        drop = {canonical(*p) for p in removed}
        return Graph(self.num_nodes, self.features, tuple(e for e in self.edges if e not in drop),
                     self.labels, self.train_mask)

    def replace(self, **changes) -> "Graph":
        fields = dict(num_nodes=self.num_nodes, features=self.features, edges=self.edges,
                      labels=self.labels, train_mask=self.train_mask)
        fields.update(changes)
        return Graph(**fields)

    def bfs_distances(self, source: int, cutoff: int | None = None) -> dict[int, int]:
        dist = {source: 0}
        queue = deque([source])
        nbrs = self.neighbors
        while queue:
            u = queue.popleft()
            d = dist[u]
            if cutoff is not None and d >= cutoff:
                continue
            for w in nbrs[u]:
                if w not in dist:
                    dist[w] = d + 1
                    queue.append(w)
        return dist

    def non_edge_count(self) -> int:
        n = self.num_nodes
        return n * (n - 1) // 2 - self.num_edges


@dataclass(frozen=True, eq=False)
class Subgraph:
    """Induced subgraph; local node ``i`` is ``parent_ids[i]`` in the parent graph."""

    parent_ids: np.ndarray
    graph: Graph

    @cached_property
    def local_index(self) -> dict[int, int]:
        return {int(p): i for i, p in enumerate(self.parent_ids)}

    def to_local(self, pair: Sequence[int]) -> Pair | None:
        idx = self.local_index
        a, b = idx.get(int(pair[0])), idx.get(int(pair[1]))
        if a is None or b is None:
            return None
        return (a, b) if a < b else (b, a)

    def to_parent(self, pair: Sequence[int]) -> Pair:
        return canonical(self.parent_ids[pair[0]], self.parent_ids[pair[1]])


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> Subgraph:
    ids = np.array(sorted(set(int(v) for v in nodes)), dtype=np.int64)
    local = {int(p): i for i, p in enumerate(ids)}
    edges = []
    nbrs = g.neighbors
    for p in ids:
        i = local[int(p)]
        for w in nbrs[p]:
            j = local.get(w)
            if j is not None and i < j:
                edges.append((i, j))
    labels = None if g.labels is None else g.labels[ids]
    mask = None if g.train_mask is None else g.train_mask[ids]
    sub = Graph(len(ids), g.features[ids], tuple(edges), labels, mask)
    ids.setflags(write=False)
    return Subgraph(ids, sub)


def two_hop_subgraph(g: Graph, center: int) -> Subgraph:
    if not 0 <= center < g.num_nodes:
        raise DomainError(f"center {center} out of range for {g.num_nodes} nodes")
    return induced_subgraph(g, g.bfs_distances(center, cutoff=2))


def sample_subgraphs(g: Graph) -> list[Subgraph]:
    """One two-hop subgraph per node, in node-id order."""
    return [two_hop_subgraph(g, v) for v in range(g.num_nodes)]


# -- JSON IO ---------------------------------------------------------------


def graph_from_dict(doc: dict) -> Graph:
    if not isinstance(doc, dict):
        raise SchemaError("graph document must be a JSON object")
    if doc.get("directed", False):
        raise SchemaError("directed graphs are not supported")
    nodes = doc.get("nodes")
    edges = doc.get("edges", [])
    if not isinstance(nodes, list) or not isinstance(edges, list):
        raise SchemaError("graph document needs 'nodes' and 'edges' arrays")
    n = len(nodes)
    by_id = {}
    for node in nodes:
        if not isinstance(node, dict) or "id" not in node:
            raise SchemaError("every node needs an integer 'id'")
        nid = node["id"]
        if not isinstance(nid, int) or isinstance(nid, bool) or not 0 <= nid < n:
            raise SchemaError(f"node id {nid!r} outside 0..{n - 1}")
        if nid in by_id:
            raise SchemaError(f"duplicate node id {nid}")
        by_id[nid] = node
    dims = {len(node.get("x", [])) for node in nodes}
    if len(dims) > 1:
        raise SchemaError(f"inconsistent feature dimensions {sorted(dims)}")
    d = dims.pop() if dims else 0
    feats = np.zeros((n, d))
    labels = np.full(n, -1, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    has_labels = has_mask = False
    for nid, node in by_id.items():
        try:
            feats[nid] = np.asarray(node.get("x", []), dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"node {nid} has non-numeric features") from exc
        y = node.get("y")
        if y is not None:
            if not isinstance(y, int) or isinstance(y, bool) or y < 0:
                raise SchemaError(f"node {nid} label must be a non-negative integer or null")
            labels[nid] = y
            has_labels = True
        if "train" in node:
            mask[nid] = bool(node["train"])
            has_mask = True
    if not np.all(np.isfinite(feats)):
        raise SchemaError("features must be finite")
    for e in edges:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in e)):
            raise SchemaError(f"edge entry {e!r} is not a pair of integers")
    return Graph(n, feats, canonical_edges(edges, n),
                 labels if has_labels else None, mask if has_mask else None)


def graph_to_dict(g: Graph) -> dict:
    nodes = []
    for v in range(g.num_nodes):
        node = {"id": v, "x": [float(x) for x in g.features[v]]}
        node["y"] = None if g.labels is None or g.labels[v] < 0 else int(g.labels[v])
        if g.train_mask is not None:
            node["train"] = bool(g.train_mask[v])
        nodes.append(node)
    return {"directed": False, "nodes": nodes, "edges": [[u, v] for u, v in g.edges]}


def load_graph(path) -> Graph:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedInputError(f"{path}: {exc}") from exc
    return graph_from_dict(doc)


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g)) + "\n", encoding="utf-8")
