"""OutlierDetect: neighbourhood class-mix edge features and a one-class SVM."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .gcn import predict_labels, train_node_classifier
from .graph import Graph, Pair, canonical
from .metrics import betweenness
from .numkit import substream_seed
from .ocsvm import OcsvmModel, fit_ocsvm
from .scores import EdgeScores

BTW_SHIFT = 1e-6
NU = 0.5


@dataclass(frozen=True)
class OdFeatures:
    """Per-endpoint statistics, u then v in canonical order."""

    distinct_classes: tuple
    avg_class_count: tuple
    max_class_count: tuple
    second_class_count: tuple
    class_count_std: tuple
    log_betweenness: tuple

    def as_array(self, include_betweenness: bool = True) -> np.ndarray:
        out = []
        for side in (0, 1):
            out.extend([self.distinct_classes[side], self.avg_class_count[side], self.max_class_count[side],
                        self.second_class_count[side], self.class_count_std[side]])
            if include_betweenness:
                out.append(self.log_betweenness[side])
        return np.array(out, dtype=np.float64)


def class_count_stats(neighbor_classes: Iterable[int]) -> tuple[float, float, float, float, float]:
    """(distinct, mean count, max count, second count, population std of counts)."""
    counts = sorted(Counter(neighbor_classes).values(), reverse=True)
    if not counts:
        return (0.0, 0.0, 0.0, 0.0, 0.0)
    arr = np.array(counts, dtype=np.float64)
    second = arr[1] if len(arr) > 1 else 0.0
    return (float(len(arr)), float(arr.mean()), float(arr[0]), float(second), float(arr.std()))


def _node_stats(g: Graph, labels: np.ndarray, btw: np.ndarray, u: int, extra: Sequence[int] = ()) -> np.ndarray:
    classes = [int(labels[w]) for w in g.neighbors[u]] + [int(labels[w]) for w in extra]
    return np.array([*class_count_stats(classes), np.log(btw[u] + BTW_SHIFT)])


def od_edge_features(g: Graph, predicted_labels, btw, pair: Sequence[int]) -> OdFeatures:
    u, v = canonical(*pair)
    linked = g.has_edge(u, v)
    su = _node_stats(g, predicted_labels, btw, u, () if linked else (v,))
    sv = _node_stats(g, predicted_labels, btw, v, () if linked else (u,))
    return OdFeatures(*((su[i], sv[i]) for i in range(6)))


class OdFeaturizer:
    """Edge features for many pairs; non-edges are featurized as if added."""

    def __init__(self, g: Graph, labels: np.ndarray, btw: np.ndarray, include_betweenness: bool = True):
        self.g = g
        self.labels = np.asarray(labels)
        self.btw = np.asarray(btw, dtype=np.float64)
        self.cols = list(range(6)) if include_betweenness else list(range(5))
        self.node = np.array([_node_stats(g, self.labels, self.btw, u) for u in range(g.num_nodes)]).reshape(-1, 6)

    def features(self, pairs: Sequence[Pair]) -> np.ndarray:
        rows = []
        for u, v in pairs:
            u, v = canonical(u, v)
            if self.g.has_edge(u, v):
                su, sv = self.node[u], self.node[v]
            else:
                su = _node_stats(self.g, self.labels, self.btw, u, (v,))
                sv = _node_stats(self.g, self.labels, self.btw, v, (u,))
            rows.append(np.concatenate([su[self.cols], sv[self.cols]]))
        return np.array(rows).reshape(-1, 2 * len(self.cols))


@dataclass
class OdModel:
    featurizer: OdFeaturizer
    svm: OcsvmModel

    def score(self, pairs: Sequence[Pair]) -> EdgeScores:
        pairs = [canonical(*p) for p in pairs]
        if not pairs:
            return EdgeScores((), np.zeros(0), "od")
        return EdgeScores(tuple(pairs), -self.svm.decision_function(self.featurizer.features(pairs)), "od")


def fit_od(g: Graph, seed: int, nu: float = NU, include_betweenness: bool = True) -> OdModel:
    if g.num_edges < 2:
        raise DomainError("outlier detection needs at least two edges")
    clf = train_node_classifier(g, substream_seed(seed, "gcn"))
    labels = predict_labels(clf, g)
    feat = OdFeaturizer(g, labels, betweenness(g), include_betweenness)
    svm = fit_ocsvm(feat.features(g.edges), nu=nu, seed=substream_seed(seed, "ocsvm"))
    return OdModel(feat, svm)


def od_detect(g: Graph, seed: int, targets=None, nu: float = NU, include_betweenness: bool = True) -> EdgeScores:
    """Maliciousness = minus the one-class SVM decision value."""
    m = fit_od(g, seed, nu, include_betweenness)
    return m.score(list(g.edges if targets is None else targets))
