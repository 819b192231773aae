"""EDoG ensemble, detector registry and experiment drivers.

Every detector takes the same instance seed and derives its own stream as
``substream_seed(seed, name)``, so composing EDoG by hand from the registry
reproduces ``edog_detect`` exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .attack import (Profile, adaptive_attack, attacked_graph, greedy_target_attack, meta_attack,
                     pick_target)
from .errors import DomainError, SchemaError
from .gcn import GcnModel, train_node_classifier
from .generators import gen_barabasi_albert, gen_erdos_renyi, split_train, synth_annotate, two_cliques
from .graph import Graph, Pair, canonical, load_graph
from .graphgen import fit_lp_filter_ggd, ggd_detect, train_ggd
from .linkpred import ald_detector, lp_detect, sample_non_edges
from .metrics import heuristic_scores, katz_detector_scores, roc_auc
from .numkit import rng, substream_seed
from .outlier import fit_od
from .scores import EdgeScores

DEGREE_GATE = 6
DETECTORS = ("lp", "ggd", "lp+ggd", "od", "edog", "ald", "katz", "cn", "aa")
COMPONENTS = ("lp+ggd", "ggd", "od")
DEFAULT_DETECTORS = ("edog", "katz", "ald")
MAX_ATTEMPTS = 40
TRAIN_FRACTION = 0.3
RANDOM_COUNTS = (1, 2, 4, 8, 16)


def rank_normalize(scores: EdgeScores) -> EdgeScores:
    """(average rank - 1) / (N - 1); a single entry maps to 0.5."""
    n = len(scores)
    if n == 0:
        raise DomainError("cannot rank-normalize an empty score set")
    if n == 1:
        return scores.with_values(np.array([0.5]))
    return scores.with_values((rankdata(scores.values) - 1.0) / (n - 1.0))


def gated_mean(lpggd: np.ndarray, ggd: np.ndarray, od: np.ndarray, degree_sums: np.ndarray) -> np.ndarray:
    """Mean of all three where the degree sum exceeds the gate, else of the first two."""
    high = np.asarray(degree_sums) > DEGREE_GATE
    return np.where(high, (lpggd + ggd + od) / 3.0, (lpggd + ggd) / 2.0)


def degree_sums(g: Graph, pairs: Sequence[Pair]) -> np.ndarray:
    """deg(u) + deg(v) in g, counting the pair itself when it is not yet an edge."""
    deg = g.degrees
    return np.array([deg[u] + deg[v] + (0 if (u, v) in g.edge_set else 2) for u, v in pairs], dtype=np.int64)


class EdogScorer:
    """Fits the three EDoG components once on ``g`` and scores arbitrary pairs."""

    def __init__(self, g: Graph, seed: int, gen_stride: int = 1):
        self.g = g
        self.gen_stride = gen_stride
        s_filter = substream_seed(seed, "lp+ggd")
        s_ggd = substream_seed(seed, "ggd")
        self.filtered = fit_lp_filter_ggd(g, s_filter, gen_stride)
        self.filtered_seed = substream_seed(s_filter, "detect")
        self.ggd = train_ggd(g, substream_seed(s_ggd, "train"), gen_stride=gen_stride)
        self.ggd_seed = substream_seed(s_ggd, "detect")
        self.od = fit_od(g, substream_seed(seed, "od"))

    def components(self, pairs: Sequence[Pair]) -> dict[str, EdgeScores]:
        pairs = [canonical(*p) for p in pairs]
        lpggd = ggd_detect(self.filtered, self.g, pairs, self.filtered_seed)
        return {
            "lp+ggd": lpggd.with_values(lpggd.values, "lp+ggd"),
            "ggd": ggd_detect(self.ggd, self.g, pairs, self.ggd_seed),
            "od": self.od.score(pairs),
        }

    def score(self, pairs: Sequence[Pair]) -> EdgeScores:
        pairs = [canonical(*p) for p in pairs]
        parts = self.components(pairs)
        return combine_edog(self.g, parts)

    def __call__(self, pairs: Sequence[Pair]) -> np.ndarray:
        return self.score(pairs).values


def combine_edog(g: Graph, parts: dict[str, EdgeScores]) -> EdgeScores:
    pairs = parts["ggd"].pairs
    norm = {k: rank_normalize(parts[k].subset(pairs)).values for k in COMPONENTS}
    vals = gated_mean(norm["lp+ggd"], norm["ggd"], norm["od"], degree_sums(g, pairs))
    return EdgeScores(pairs, vals, "edog")


def edog_detect(g: Graph, seed: int, targets=None, gen_stride: int = 1) -> EdgeScores:
    if g.num_edges == 0:
        raise DomainError("EDoG needs a graph with edges")
    return EdogScorer(g, seed, gen_stride).score(list(g.edges if targets is None else targets))


def _run_one(name: str, g: Graph, seed: int, targets, gen_stride: int) -> EdgeScores:
    s = substream_seed(seed, name)
    if name == "lp":
        return lp_detect(g, s, targets)
    if name == "ald":
        return ald_detector(g, s, targets)
    if name == "ggd":
        m = train_ggd(g, substream_seed(s, "train"), gen_stride=gen_stride)
        return ggd_detect(m, g, targets, substream_seed(s, "detect"))
    if name == "lp+ggd":
        m = fit_lp_filter_ggd(g, s, gen_stride)
        out = ggd_detect(m, g, targets, substream_seed(s, "detect"))
        return out.with_values(out.values, "lp+ggd")
    if name == "od":
        return fit_od(g, s).score(list(g.edges if targets is None else targets))
    if name == "katz":
        out = katz_detector_scores(g)
        return out if targets is None else out.subset([canonical(*t) for t in targets])
    if name in ("cn", "aa"):
        return heuristic_scores(g, name, targets)
    raise DomainError(f"unknown detector {name!r}; choose from {', '.join(DETECTORS)}")


def detect_many(g: Graph, seed: int, names: Sequence[str], targets=None, gen_stride: int = 1) -> dict[str, EdgeScores]:
    """Run several detectors, fitting each EDoG component only once."""
    for name in names:
        if name not in DETECTORS:
            raise DomainError(f"unknown detector {name!r}; choose from {', '.join(DETECTORS)}")
    if g.num_edges == 0:
        raise DomainError("detection needs a graph with edges")
    targets = list(g.edges if targets is None else (canonical(*t) for t in targets))
    out: dict[str, EdgeScores] = {}
    needed = [n for n in COMPONENTS if n in names or "edog" in names]
    for name in needed:
        out[name] = _run_one(name, g, seed, targets, gen_stride)
    if "edog" in names:
        out["edog"] = combine_edog(g, {k: out[k] for k in COMPONENTS})
    for name in names:
        if name not in out:
            out[name] = _run_one(name, g, seed, targets, gen_stride)
    return {name: out[name] for name in names}


def run_detector(name: str, g: Graph, seed: int, targets=None, gen_stride: int = 1) -> EdgeScores:
    return detect_many(g, seed, [name], targets, gen_stride)[name]


# -- experiments -------------------------------------------------------------


@dataclass
class ExperimentConfig:
    dataset: dict
    profile: str = "single"
    targets: int = 5
    degrees: list | None = None
    min_degree: int = 1
    detectors: tuple = DEFAULT_DETECTORS
    seed: int = 0
    max_attempts: int = MAX_ATTEMPTS
    adaptive: bool = False
    gen_stride: int = 1
    timing: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict) or "dataset" not in doc:
            raise SchemaError("experiment config needs a 'dataset' object")
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise SchemaError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**doc)
        cfg.detectors = tuple(cfg.detectors)
        Profile.parse(cfg.profile)
        for name in cfg.detectors:
            if name not in DETECTORS:
                raise DomainError(f"unknown detector {name!r}")
        if cfg.targets < 0 or cfg.max_attempts < 1:
            raise DomainError("targets must be >= 0 and max_attempts >= 1")
        return cfg


def build_dataset(spec: dict) -> Graph:
    """A graph from ``{"file": path}`` or ``{"generator": "ba"|"er"|"two-cliques", ...}``.

    Random graphs get synthetic features and labels; any graph without a
    training mask gets a seeded split.
    """
    spec = dict(spec)
    seed = int(spec.get("seed", 0))
    if "file" in spec:
        g = load_graph(spec["file"])
        if g.labels is None:
            raise SchemaError(f"{spec['file']}: experiments need node labels")
    elif spec.get("generator") == "ba":
        g = gen_barabasi_albert(int(spec["n"]), int(spec.get("m", 1)), seed)
    elif spec.get("generator") == "er":
        g = gen_erdos_renyi(int(spec["n"]), float(spec["p"]), seed)
    elif spec.get("generator") == "two-cliques":
        g = two_cliques(int(spec.get("size", 7)), int(spec.get("bridges", 2)), int(spec.get("pendants", 2)),
                        int(spec.get("dim", 20)), float(spec.get("signal", 0.15)), seed)
    else:
        raise SchemaError("dataset needs 'file' or 'generator' in {ba, er, two-cliques}")
    if g.feature_dim == 0 and "file" not in spec:
        g = synth_annotate(g, dim=int(spec.get("dim", 20)), seed=substream_seed(seed, "annotate"))
    if g.train_mask is None:
        g = split_train(g, float(spec.get("train_fraction", TRAIN_FRACTION)), substream_seed(seed, "split"))
    return g


def _attack(g, clf, target, profile, seed, scorer=None):
    if scorer is not None:
        return adaptive_attack(g, clf, target, profile, scorer, seed)
    return greedy_target_attack(g, clf, target, profile, seed)


def _target_record(g: Graph, result, aucs: dict) -> dict:
    return {
        "target": result.target,
        "degree": None if result.target is None else int(g.degrees[result.target]),
        "added_edges": [list(e) for e in result.added_edges],
        "success": bool(result.success),
        "pre": result.pre_label if result.target is not None else result.pre_rate,
        "post": result.post_label if result.target is not None else result.post_rate,
        "auc": aucs,
    }


def _aucs(attacked: Graph, result, detectors, seed, gen_stride) -> dict:
    scores = detect_many(attacked, seed, detectors, gen_stride=gen_stride)
    return {name: roc_auc(s, result.added_edges) for name, s in scores.items()}


def _queue(g: Graph, clf: GcnModel, cfg: ExperimentConfig) -> list[tuple]:
    """Targets in the order they are tried, grouped per requested degree when given."""
    order = pick_target(g, clf, substream_seed(cfg.seed, "targets"), min_degree=cfg.min_degree)
    if cfg.degrees is None:
        return [(t, None) for t in order]
    out = []
    for d in cfg.degrees:
        out.append(([t for t in order if g.degrees[t] == d], d))
    return out


def known_attack_view(aggregate: dict) -> dict | None:
    """Best EDoG-family primitive once the attack type is known."""
    family = {k: v for k, v in aggregate.items() if k in ("lp+ggd", "od", "edog") and v is not None}
    if not family:
        return None
    best = max(sorted(family), key=lambda k: family[k])
    return {"detector": best, "auc": family[best]}


def run_experiment(config) -> dict:
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    started = time.perf_counter()
    g = build_dataset(cfg.dataset)
    profile = Profile.parse(cfg.profile)
    clf = train_node_classifier(g, substream_seed(cfg.seed, "classifier"))
    scorer = None
    if cfg.adaptive:
        if profile is Profile.META:
            raise DomainError("adaptive experiments need a targeted profile")
        scorer = EdogScorer(g, substream_seed(cfg.seed, "adaptive"), cfg.gen_stride)
    records, failed, attempts = [], [], 0

    def consider(target):
        nonlocal attempts
        attempts += 1
        if target is None:
            result = meta_attack(g, clf, substream_seed(cfg.seed, "attack", "meta", attempts))
        else:
            result = _attack(g, clf, target, profile, substream_seed(cfg.seed, "attack", target), scorer)
        if not result.success:
            failed.append(None if target is None else int(target))
            return False
        attacked = attacked_graph(g, result)
        aucs = _aucs(attacked, result, cfg.detectors, substream_seed(cfg.seed, "detect", attempts), cfg.gen_stride)
        records.append(_target_record(g, result, aucs))
        return True

    if profile is Profile.META:
        # each meta trial samples its own candidates, so retries differ
        while len(records) < cfg.targets and attempts < cfg.max_attempts:
            consider(None)
    elif cfg.degrees is None:
        for t, _ in _queue(g, clf, cfg):
            if len(records) >= cfg.targets or attempts >= cfg.max_attempts:
                break
            consider(t)
    else:
        for pool, _ in _queue(g, clf, cfg):
            for t in pool:
                if attempts >= cfg.max_attempts or consider(t):
                    break

    wanted = len(cfg.degrees) if cfg.degrees is not None else cfg.targets
    warning = None
    if len(records) < wanted:
        warning = f"only {len(records)} of {wanted} attacks succeeded within {cfg.max_attempts} attempts"
    aggregate = {}
    for name in cfg.detectors:
        vals = [r["auc"][name] for r in records]
        aggregate[name] = float(np.mean(vals)) if vals else None
    report = {
        "dataset": cfg.dataset,
        "graph": {"num_nodes": g.num_nodes, "num_edges": g.num_edges},
        "profile": profile.value,
        "adaptive": cfg.adaptive,
        "seed": cfg.seed,
        "detectors": list(cfg.detectors),
        "targets": records,
        "failed_targets": failed,
        "attempts": attempts,
        "aggregate_auc": aggregate,
        "known_attack_view": known_attack_view(aggregate),
        "warning": warning,
    }
    if cfg.timing:
        report["wall_clock_s"] = time.perf_counter() - started
    return report


def adaptive_comparison(dataset: dict, profile: str = "single", num_targets: int = 10, seed: int = 0,
                        gen_stride: int = 1) -> dict:
    """Standard vs adaptive success on the same fixed targets and attack seeds."""
    profile = Profile.parse(profile)
    g = build_dataset(dataset)
    clf = train_node_classifier(g, substream_seed(seed, "classifier"))
    targets = pick_target(g, clf, substream_seed(seed, "targets"))[:num_targets]
    scorer = EdogScorer(g, substream_seed(seed, "adaptive"), gen_stride)
    rows = []
    for t in targets:
        a_seed = substream_seed(seed, "attack", t)
        std = greedy_target_attack(g, clf, t, profile, a_seed)
        ada = adaptive_attack(g, clf, t, profile, scorer, a_seed)
        rows.append({"target": int(t), "standard": bool(std.success), "adaptive": bool(ada.success),
                     "adaptive_edges": [list(e) for e in ada.added_edges]})
    return {
        "profile": profile.value,
        "targets": rows,
        "standard_success": sum(r["standard"] for r in rows),
        "adaptive_success": sum(r["adaptive"] for r in rows),
    }


def top_k_non_random_ratio(scores: EdgeScores, random_edges: Sequence[Pair], k: int, gen: np.random.Generator) -> float:
    """Fraction of the k most suspicious edges that are not random; ties broken by a seeded shuffle."""
    if k < 1:
        raise DomainError("k must be >= 1")
    tie = gen.permutation(len(scores))
    order = np.lexsort((tie, -scores.values))[:k]
    rand = set(canonical(*e) for e in random_edges)
    return float(np.mean([scores.pairs[i] not in rand for i in order]))


def random_edge_experiment(g: Graph, counts: Sequence[int] = RANDOM_COUNTS, seed: int = 0,
                           detectors: Sequence[str] = DEFAULT_DETECTORS, gen_stride: int = 1) -> dict:
    counts = [int(k) for k in counts]
    if not counts or any(k < 1 for k in counts):
        raise DomainError("random-edge counts must all be >= 1")
    if g.non_edge_count() < max(counts):
        raise DomainError("not enough non-edges for the requested counts")
    per = {name: {} for name in detectors}
    for k in counts:
        added = [tuple(p) for p in sample_non_edges(g, k, rng(seed, "random_edges", k)).tolist()]
        noisy = g.with_edges(added)
        scores = detect_many(noisy, substream_seed(seed, "detect", k), detectors, gen_stride=gen_stride)
        for name, s in scores.items():
            per[name][str(k)] = top_k_non_random_ratio(s, added, k, rng(seed, "ties", k, name))
    return {
        "counts": counts,
        "ratio": per,
        "mean_ratio": {name: float(np.mean(list(v.values()))) for name, v in per.items()},
    }


def target_scene(g: Graph, result, scores: EdgeScores | None = None) -> dict:
    """JSON scene of the target's two-hop neighbourhood after the attack."""
    if result.target is None:
        raise DomainError("scenes are drawn around a target node")
    attacked = attacked_graph(g, result)
    dist = attacked.bfs_distances(result.target, 2)
    nodes = sorted(v for v, d in dist.items() if d <= 2)
    inside = set(nodes)
    malicious = set(canonical(*e) for e in result.added_edges)
    lookup = scores.as_dict() if scores is not None else {}
    edges = [{"u": u, "v": v, "malicious": (u, v) in malicious, "score": lookup.get((u, v))}
             for u, v in attacked.edges if u in inside and v in inside]
    return {
        "target": int(result.target),
        "nodes": [{"id": v, "hop": int(dist[v]), "label": None if g.labels is None else int(g.labels[v])}
                  for v in nodes],
        "edges": edges,
    }

