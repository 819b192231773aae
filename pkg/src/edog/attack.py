"""Greedy edge-insertion evasion attacks on a fixed node classifier.

Four constraint profiles bound what the attacker may add:

* ``single``          one edge (incident to the target by default)
* ``multi-direct``    up to deg(target) edges, every one incident to the target
* ``multi-indirect``  up to deg(target) edges, none incident to the target
* ``meta``            up to floor(5% |E|) edges anywhere, global objective

Each greedy step adds the candidate that raises the attacker's loss the most
and stops when nothing improves, the budget runs out, or (for targeted
profiles) the target flips.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SchemaError
from .gcn import GcnModel, LocalEvaluator, forward_logits, normalized_adjacency, predict_labels
from .graph import Graph, Pair, canonical
from .linkpred import sample_non_edges
from .numkit import PROB_FLOOR, rng, softmax

META_FRACTION = 0.05
META_CANDIDATES = 500
ADAPTIVE_QUANTILE = 0.25


class Profile(str, Enum):
    SINGLE = "single"
    MULTI_DIRECT = "multi-direct"
    MULTI_INDIRECT = "multi-indirect"
    META = "meta"

    @classmethod
    def parse(cls, value) -> "Profile":
        try:
            return cls(value)
        except ValueError as exc:
            raise DomainError(f"unknown attack profile {value!r}") from exc


def budget(profile: Profile, g: Graph, target: int | None = None) -> int:
    if profile is Profile.SINGLE:
        return 1
    if profile is Profile.META:
        return int(math.floor(META_FRACTION * g.num_edges))
    if target is None:
        raise DomainError(f"{profile.value} attack needs a target")
    return int(g.degrees[target])


@dataclass
class AttackResult:
    profile: str
    target: int | None
    added_edges: list
    success: bool
    pre_label: int | None = None
    post_label: int | None = None
    pre_rate: float | None = None
    post_rate: float | None = None
    seed: int = 0
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["added_edges"] = [list(e) for e in self.added_edges]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackResult":
        try:
            doc = dict(doc)
            doc["added_edges"] = [canonical(*e) for e in doc["added_edges"]]
            return cls(**doc)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad attack record: {exc}") from exc


def save_attack(result: AttackResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict()) + "\n", encoding="utf-8")


def load_attack(path) -> AttackResult:
    try:
        return AttackResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def constraint_violations(g: Graph, result: AttackResult) -> list[str]:
    """Every way ``result`` breaks its profile's rules on the clean graph ``g``."""
    profile = Profile.parse(result.profile)
    problems = []
    added = [canonical(*e) for e in result.added_edges]
    if len(set(added)) != len(added):
        problems.append("duplicate added edges")
    if any(e in g.edge_set for e in added):
        problems.append("added edge already present in the clean graph")
    if len(added) > budget(profile, g, result.target):
        problems.append(f"{len(added)} edges exceed the {profile.value} budget")
    if profile in (Profile.MULTI_DIRECT, Profile.SINGLE) and result.notes.get("arbitrary_single") is not True:
        if any(result.target not in e for e in added):
            problems.append("edge not incident to the target")
    if profile is Profile.MULTI_INDIRECT and any(result.target in e for e in added):
        problems.append("indirect attack touched the target")
    return problems


def candidate_pairs(g: Graph, target: int, profile: Profile, arbitrary_single: bool = False) -> list[Pair]:
    """The non-edges a targeted profile may add, in canonical order."""
    n = g.num_nodes
    if profile is Profile.META:
        raise DomainError("meta attack candidates are sampled per step")
    if profile is Profile.SINGLE and arbitrary_single:
        return [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in g.edge_set]
    if profile in (Profile.SINGLE, Profile.MULTI_DIRECT):
        nbrs = set(g.neighbors[target])
        return sorted(canonical(target, w) for w in range(n) if w != target and w not in nbrs)
    ring = set(g.neighbors[target])
    out = set()
    for a in ring:
        for b in range(n):
            if b != a and b != target:
                pair = canonical(a, b)
                if pair not in g.edge_set:
                    out.add(pair)
    return sorted(out)


def _check_target(m: GcnModel, g: Graph, target: int) -> tuple[int, int]:
    if g.labels is None or not 0 <= target < g.num_nodes or g.labels[target] < 0:
        raise DomainError(f"target {target} has no ground-truth label")
    y = int(g.labels[target])
    pred = int(np.argmax(LocalEvaluator(m, g).probs(target)))
    if pred != y:
        raise DomainError(f"target {target} is already misclassified ({pred} != {y})")
    return y, pred


def greedy_target_attack(g: Graph, m: GcnModel, target: int, profile, seed: int = 0,
                         candidates: Sequence[Pair] | None = None, arbitrary_single: bool = False) -> AttackResult:
    profile = Profile.parse(profile)
    if profile is Profile.META:
        raise DomainError("use meta_attack for the meta profile")
    y, pre = _check_target(m, g, target)
    if candidates is None:
        candidates = candidate_pairs(g, target, profile, arbitrary_single)
    pool = sorted(set(canonical(*c) for c in candidates) - g.edge_set)
    limit = budget(profile, g, target)
    evaluator = LocalEvaluator(m, g)
    added: list[Pair] = []
    probs = evaluator.probs(target)
    loss = -np.log(max(probs[y], PROB_FLOOR))
    history = [float(loss)]
    while len(added) < limit and pool:
        best, best_loss, best_probs = None, loss, None
        for pair in pool:
            p = evaluator.probs(target, added + [pair])
            cand = -np.log(max(p[y], PROB_FLOOR))
            if cand > best_loss:
                best, best_loss, best_probs = pair, cand, p
        if best is None:
            break
        added.append(best)
        pool.remove(best)
        loss, probs = best_loss, best_probs
        history.append(float(loss))
        if int(np.argmax(probs)) != y:
            break
    post = int(np.argmax(probs))
    notes = {"loss_history": history}
    if arbitrary_single:
        notes["arbitrary_single"] = True
    return AttackResult(profile.value, int(target), added, post != pre, pre, post, seed=seed, notes=notes)


def _misclassification_rate(m: GcnModel, g: Graph, a_hat: np.ndarray) -> float:
    labeled = np.flatnonzero(g.labels >= 0)
    logits, _, _ = forward_logits(m.params(), a_hat, g.features)
    return float(np.mean(np.argmax(logits[labeled], axis=1) != g.labels[labeled]))


def _normalize(a: np.ndarray) -> np.ndarray:
    tilde = a + np.eye(a.shape[0])
    dinv = 1.0 / np.sqrt(tilde.sum(axis=1))
    return tilde * dinv[:, None] * dinv[None, :]


def meta_attack(g: Graph, m: GcnModel, seed: int = 0, candidates_per_step: int = META_CANDIDATES) -> AttackResult:
    """Greedy global attack maximizing summed cross-entropy on the training nodes."""
    limit = budget(Profile.META, g)
    if limit < 1:
        raise DomainError(f"meta budget is zero for {g.num_edges} edges")
    if g.labels is None:
        raise DomainError("meta attack needs labels")
    mask = g.train_mask if g.train_mask is not None else g.labels >= 0
    train = np.flatnonzero(mask & (g.labels >= 0))
    params = m.params()
    gen = rng(seed, "meta_attack")

    def objective(adj):
        logits, _, _ = forward_logits(params, _normalize(adj), g.features)
        p = softmax(logits[train], axis=1)
        return float(-np.log(np.maximum(p[np.arange(len(train)), g.labels[train]], PROB_FLOOR)).sum())

    adj = g.adjacency()
    pre_rate = _misclassification_rate(m, g, normalized_adjacency(g))
    current = objective(adj)
    added: list[Pair] = []
    history = [current]
    while len(added) < limit:
        now = g.with_edges(added)
        k = min(candidates_per_step, now.non_edge_count())
        if k == 0:
            break
        cands = sorted(map(tuple, sample_non_edges(now, k, gen).tolist()))
        best, best_val = None, current
        for u, v in cands:
            adj[u, v] = adj[v, u] = 1.0
            val = objective(adj)
            adj[u, v] = adj[v, u] = 0.0
            if val > best_val:
                best, best_val = (u, v), val
        if best is None:
            break
        adj[best[0], best[1]] = adj[best[1], best[0]] = 1.0
        added.append(best)
        current = best_val
        history.append(current)
    post_rate = _misclassification_rate(m, g, _normalize(adj))
    return AttackResult(Profile.META.value, None, added, post_rate > pre_rate, pre_rate=pre_rate,
                        post_rate=post_rate, seed=seed, notes={"loss_history": history})


def restrict_candidates(candidates: Sequence[Pair], scores: np.ndarray,
                        quantile: float = ADAPTIVE_QUANTILE) -> list[Pair]:
    """The floor(quantile * N) lowest-scoring candidates; ties by canonical order."""
    k = int(math.floor(quantile * len(candidates)))
    order = sorted(range(len(candidates)), key=lambda i: (scores[i], candidates[i]))
    return [candidates[i] for i in order[:k]]


def adaptive_attack(g: Graph, m: GcnModel, target: int, profile, edog_scorer: Callable[[list], np.ndarray],
                    seed: int = 0, arbitrary_single: bool = False) -> AttackResult:
    """Greedy attack limited to the candidates the detector finds least suspicious."""
    profile = Profile.parse(profile)
    if profile is Profile.META:
        raise DomainError("the adaptive attack is defined for targeted profiles")
    _check_target(m, g, target)
    cands = candidate_pairs(g, target, profile, arbitrary_single)
    scores = np.asarray(edog_scorer(cands), dtype=np.float64)
    allowed = restrict_candidates(cands, scores)
    if not allowed:
        y = int(g.labels[target])
        return AttackResult(profile.value, int(target), [], False, y, y, seed=seed,
                            notes={"restricted": 0, "candidates": len(cands)})
    result = greedy_target_attack(g, m, target, profile, seed, allowed, arbitrary_single)
    result.notes.update({"restricted": len(allowed), "candidates": len(cands),
                         "threshold": float(max(scores[[cands.index(a) for a in allowed]]))})
    return result


def attacked_graph(g: Graph, result: AttackResult) -> Graph:
    return g.with_edges(result.added_edges)


def pick_target(g: Graph, m: GcnModel, seed: int, degree: int | None = None,
                min_degree: int = 1, exclude: Sequence[int] = ()) -> list[int]:
    """Correctly classified labeled nodes in a seeded random order."""
    pred = predict_labels(m, g)
    ok = (g.labels >= 0) & (pred == g.labels) & (g.degrees >= min_degree)
    if degree is not None:
        ok &= g.degrees == degree
    nodes = np.flatnonzero(ok)
    nodes = nodes[~np.isin(nodes, list(exclude))]
    return rng(seed, "targets").permutation(nodes).tolist()
