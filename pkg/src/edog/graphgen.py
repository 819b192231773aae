"""GraphGenDetect: an edge-by-edge generation model used as a likelihood scorer.

The model embeds a partially built graph with a two-layer GCN and scores a
node pair with a bilinear form of the two embeddings. Replaying a random edge
order over each two-hop subgraph and averaging the per-step link probability
of a pair tells how "expected" that pair is; pairs the model would rarely
generate are flagged.

All time steps of one replay are evaluated together as a stack of normalized
adjacency matrices of shape (steps, k, k); long replays are processed in chunks
so memory stays bounded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, SchemaError
from .gcn import HIDDEN
from .graph import Graph, Pair, Subgraph, canonical, sample_subgraphs
from .linkpred import lp_pair_scores, sample_non_edges, train_lp
from .numkit import Adam, PROB_FLOOR, glorot_uniform, relu, rng, stable_sigmoid, substream_seed
from .scores import EdgeScores

EPOCHS = 15
LR = 0.001
CHECKPOINT_EPOCHS = range(6, 16)
FILTER_FRACTION = 0.5
EMPTY_AVERAGE = 0.5
# max floats in one (steps, k, k) adjacency stack
STACK_BUDGET = 4_000_000


@dataclass
class GgdModel:
    params: dict
    checkpoints: list = field(default_factory=list)
    seed: int = 0
    epochs: int = EPOCHS
    lr: float = LR
    gen_stride: int = 1
    loss_history: list = field(default_factory=list, repr=False)

    def snapshots(self) -> list[dict]:
        return [p for _, p in self.checkpoints] or [self.params]

    def to_dict(self) -> dict:
        def enc(p):
            return {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()} for k, v in p.items()}
        return {
            "kind": "ggd",
            "hyper": {"seed": self.seed, "epochs": self.epochs, "lr": self.lr, "gen_stride": self.gen_stride},
            "final": enc(self.params),
            "checkpoints": [{"epoch": e, "weights": enc(p)} for e, p in self.checkpoints],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GgdModel":
        def dec(p):
            return {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in p.items()}
        try:
            hyper = doc["hyper"]
            return cls(dec(doc["final"]), [(int(c["epoch"]), dec(c["weights"])) for c in doc["checkpoints"]],
                       int(hyper["seed"]), int(hyper["epochs"]), float(hyper["lr"]), int(hyper["gen_stride"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad generation-model checkpoint: {exc}") from exc


def save_ggd(m: GgdModel, path) -> None:
    Path(path).write_text(json.dumps(m.to_dict()) + "\n", encoding="utf-8")


def load_ggd(path) -> GgdModel:
    return GgdModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def init_ggd_params(feature_dim: int, seed: int, hidden: int = HIDDEN) -> dict:
    gen = rng(seed, "ggd_init")
    return {"w1": glorot_uniform(gen, feature_dim, hidden),
            "w2": glorot_uniform(gen, hidden, hidden),
            "w": np.zeros((hidden, hidden))}


# -- one replay of a subgraph ---------------------------------------------


class Replay:
    """A subgraph, an edge order, and the target pairs scored along it.

    ``insert_time[e]`` is the position of target ``e`` in the order (inf for
    non-edges); a target is scored at step t while t <= insert_time.
    """

    def __init__(self, x: np.ndarray, edges: np.ndarray, order: np.ndarray, targets: np.ndarray,
                 stride: int = 1):
        self.x = x
        self.k = x.shape[0]
        self.targets = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
        ordered = np.asarray(edges, dtype=np.int64).reshape(-1, 2)[order]
        self.num_steps = len(ordered)
        ins = np.full((self.k, self.k), np.inf)
        ins[ordered[:, 0], ordered[:, 1]] = np.arange(self.num_steps)
        ins[ordered[:, 1], ordered[:, 0]] = np.arange(self.num_steps)
        self.ins = ins
        self.steps = np.arange(0, self.num_steps, max(1, int(stride)))
        t_ins = ins[self.targets[:, 0], self.targets[:, 1]] if len(self.targets) else np.zeros(0)
        self.mask = (self.steps[:, None] <= t_ins[None, :]).astype(np.float64)
        self.counts = self.mask.sum(axis=0)
        self.scatter_u = np.zeros((len(self.targets), self.k))
        self.scatter_u[np.arange(len(self.targets)), self.targets[:, 0]] = 1.0
        self.scatter_v = np.zeros((len(self.targets), self.k))
        self.scatter_v[np.arange(len(self.targets)), self.targets[:, 1]] = 1.0

    def chunks(self):
        per = max(1, STACK_BUDGET // max(1, self.k * self.k))
        for start in range(0, len(self.steps), per):
            yield slice(start, min(start + per, len(self.steps)))

    def a_hat(self, sl: slice) -> np.ndarray:
        a = (self.ins[None, :, :] < self.steps[sl, None, None]).astype(np.float64)
        idx = np.arange(self.k)
        a[:, idx, idx] = 1.0
        dinv = 1.0 / np.sqrt(a.sum(axis=2))
        return a * dinv[:, :, None] * dinv[:, None, :]


def _forward(params: dict, replay: Replay, a_hat: np.ndarray):
    xw1 = replay.x @ params["w1"]
    z1 = a_hat @ xw1
    h1 = relu(z1)
    ah1 = a_hat @ h1
    z2 = ah1 @ params["w2"]
    h2 = relu(z2)
    tg = replay.targets
    hu = h2[:, tg[:, 0], :]
    hv = h2[:, tg[:, 1], :]
    s = np.einsum("tmi,ij,tmj->tm", hu, params["w"], hv)
    return stable_sigmoid(s), (z1, ah1, z2, hu, hv)


def replay_probabilities(params: dict, replay: Replay) -> np.ndarray:
    """Per-step link probability matrix (steps, targets); masked entries are zero."""
    out = np.zeros_like(replay.mask)
    for sl in replay.chunks():
        prob, _ = _forward(params, replay, replay.a_hat(sl))
        out[sl] = prob * replay.mask[sl]
    return out


def replay_averages(params: dict, replay: Replay) -> np.ndarray:
    if replay.num_steps == 0:
        return np.full(len(replay.targets), EMPTY_AVERAGE)
    total = replay_probabilities(params, replay).sum(axis=0)
    return np.divide(total, replay.counts, out=np.full_like(total, EMPTY_AVERAGE), where=replay.counts > 0)


def replay_loss_and_grad(params: dict, replay: Replay, labels: np.ndarray):
    """Summed BCE of the averaged link probabilities and its gradient."""
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    if replay.num_steps == 0 or len(replay.targets) == 0:
        return 0.0, zeros
    chunks = list(replay.chunks())
    cached = None
    total = np.zeros(len(replay.targets))
    for sl in chunks:
        a_hat = replay.a_hat(sl)
        prob, inter = _forward(params, replay, a_hat)
        total += (prob * replay.mask[sl]).sum(axis=0)
        if len(chunks) == 1:
            cached = (a_hat, prob, inter)
    avg = total / replay.counts
    p = np.clip(avg, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = float(np.sum(-(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))))
    d_avg = -labels / p + (1.0 - labels) / (1.0 - p)
    grads = zeros
    w, w2 = params["w"], params["w2"]
    for sl in chunks:
        if cached is not None:
            a_hat, prob, (z1, ah1, z2, hu, hv) = cached
        else:
            a_hat = replay.a_hat(sl)
            prob, (z1, ah1, z2, hu, hv) = _forward(params, replay, a_hat)
        ds = replay.mask[sl] / replay.counts * d_avg * prob * (1.0 - prob)
        grads["w"] += np.einsum("tm,tmi,tmj->ij", ds, hu, hv)
        d_hu = ds[:, :, None] * (hv @ w.T)
        d_hv = ds[:, :, None] * (hu @ w)
        d_h2 = replay.scatter_u.T @ d_hu + replay.scatter_v.T @ d_hv
        d_z2 = d_h2 * (z2 > 0)
        grads["w2"] += np.einsum("tki,tkj->ij", ah1, d_z2)
        d_h1 = a_hat @ (d_z2 @ w2.T)
        d_z1 = d_h1 * (z1 > 0)
        grads["w1"] += replay.x.T @ (a_hat @ d_z1).sum(axis=0)
    return loss, grads


def replay_loss(params: dict, replay: Replay, labels: np.ndarray) -> float:
    avg = replay_averages(params, replay)
    p = np.clip(avg, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return float(np.sum(-(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))))


def edge_link_prob_lists(params: dict, sub: Graph, targets: Sequence[Pair], order: Sequence[int]) -> dict:
    """Step-by-step reference of the replay loop, returning every probability.

    Straight-line version used to check the batched path; ``order`` indexes
    ``sub.edges``.
    """
    from .gcn import embed_forward, normalized_adjacency

    lists = {tuple(t): [] for t in targets}
    present: list[Pair] = []
    for t in range(sub.num_edges):
        g_t = Graph(sub.num_nodes, sub.features, tuple(present))
        h2, _ = embed_forward(params["w1"], params["w2"], normalized_adjacency(g_t), sub.features)
        current = set(present)
        for pair in lists:
            if canonical(*pair) not in current:
                s = h2[pair[0]] @ params["w"] @ h2[pair[1]]
                lists[pair].append(stable_sigmoid(s))
        present.append(sub.edges[order[t]])
    return lists


# -- mapping targets onto subgraphs ----------------------------------------


def _balls(g: Graph) -> list[frozenset]:
    return [frozenset(g.bfs_distances(v, cutoff=2)) for v in range(g.num_nodes)]


def assign_targets(g: Graph, targets: np.ndarray, balls=None) -> list[list[int]]:
    """For each center node, indices of targets lying inside its two-hop ball."""
    balls = balls or _balls(g)
    per_center: list[list[int]] = [[] for _ in range(g.num_nodes)]
    for i, (u, v) in enumerate(np.asarray(targets).reshape(-1, 2).tolist()):
        for c in balls[u] & balls[v]:
            per_center[c].append(i)
    for lst in per_center:
        lst.sort()
    return per_center


def _local_targets(sub: Subgraph, targets: np.ndarray, idx: list[int]) -> np.ndarray:
    loc = sub.local_index
    out = np.empty((len(idx), 2), dtype=np.int64)
    for r, i in enumerate(idx):
        a, b = loc[int(targets[i, 0])], loc[int(targets[i, 1])]
        out[r] = (a, b) if a < b else (b, a)
    return out


def edge_link_probs(m: GgdModel, sub: Subgraph, targets: Sequence[Pair], gen: np.random.Generator) -> dict:
    """Averaged link probability of each target pair over one random edge order.

    Targets are given in parent ids. An edgeless subgraph returns 0.5 for all.
    """
    local = []
    for t in targets:
        lt = sub.to_local(t)
        if lt is None:
            raise DomainError(f"target {tuple(t)} lies outside the subgraph")
        local.append(lt)
    order = gen.permutation(sub.graph.num_edges)
    replay = Replay(sub.graph.features, sub.graph.edge_array, order, np.array(local).reshape(-1, 2),
                    m.gen_stride)
    avgs = replay_averages(m.params, replay)
    return {canonical(*t): float(a) for t, a in zip(targets, avgs)}


# -- training --------------------------------------------------------------


def train_ggd(g: Graph, seed: int, epochs: int = EPOCHS, lr: float = LR, gen_stride: int = 1,
              checkpoint_epochs=CHECKPOINT_EPOCHS) -> GgdModel:
    """Adam on replay losses, one step per two-hop subgraph, node-id order."""
    if g.num_edges < 1:
        raise DomainError("generation model needs at least one edge")
    if g.non_edge_count() < g.num_edges:
        raise DomainError("graph too dense to sample as many non-edges as edges")
    params = init_ggd_params(g.feature_dim, seed)
    subs = sample_subgraphs(g)
    balls = _balls(g)
    gen = rng(seed, "ggd_train")
    opt = Adam(lr)
    model = GgdModel(params, [], seed, epochs, lr, gen_stride)
    for epoch in range(1, epochs + 1):
        negatives = sample_non_edges(g, g.num_edges, gen)
        all_pairs = np.vstack([g.edge_array, negatives])
        labels_all = np.r_[np.ones(g.num_edges), np.zeros(len(negatives))]
        per_center = assign_targets(g, all_pairs, balls)
        epoch_loss, scored = 0.0, 0
        for c, sub in enumerate(subs):
            if sub.graph.num_edges == 0:
                continue
            order = gen.permutation(sub.graph.num_edges)
            idx = per_center[c]
            replay = Replay(sub.graph.features, sub.graph.edge_array, order,
                            _local_targets(sub, all_pairs, idx), gen_stride)
            loss, grads = replay_loss_and_grad(params, replay, labels_all[idx])
            epoch_loss += loss
            scored += len(idx)
            params = opt.step(params, grads)
            params["w"] = (params["w"] + params["w"].T) / 2.0
        model.loss_history.append(epoch_loss / max(1, scored))
        if epoch in checkpoint_epochs:
            model.checkpoints.append((epoch, {k: v.copy() for k, v in params.items()}))
    model.params = params
    return model


# -- detection -------------------------------------------------------------


def ggd_detect(m: GgdModel, g: Graph, targets=None, seed: int = 0) -> EdgeScores:
    """Maliciousness = 1 - pooled averaged link probability, averaged over checkpoints."""
    targets = list(g.edges if targets is None else (canonical(*t) for t in targets))
    if not targets:
        return EdgeScores((), np.zeros(0), "ggd")
    tarr = np.asarray(targets, dtype=np.int64)
    snapshots = m.snapshots()
    sums = np.zeros((len(snapshots), len(targets)))
    counts = np.zeros(len(targets))
    per_center = assign_targets(g, tarr)
    gen = rng(seed, "ggd_detect")
    for c, sub in enumerate(sample_subgraphs(g)):
        if sub.graph.num_edges == 0:
            continue
        order = gen.permutation(sub.graph.num_edges)
        idx = per_center[c]
        if not idx:
            continue
        replay = Replay(sub.graph.features, sub.graph.edge_array, order, _local_targets(sub, tarr, idx),
                        m.gen_stride)
        for s, params in enumerate(snapshots):
            sums[s, idx] += replay_averages(params, replay)
        counts[idx] += 1
    pooled = np.divide(sums, counts[None, :], out=np.full_like(sums, EMPTY_AVERAGE), where=counts[None, :] > 0)
    return EdgeScores(tuple(targets), (1.0 - pooled).mean(axis=0), "ggd")


def ggd_fit_detect(g: Graph, seed: int, targets=None, gen_stride: int = 1) -> EdgeScores:
    m = train_ggd(g, substream_seed(seed, "train"), gen_stride=gen_stride)
    return ggd_detect(m, g, targets, substream_seed(seed, "detect"))


def filter_edges(scores: EdgeScores, fraction: float = FILTER_FRACTION) -> list[Pair]:
    """The ceil(fraction * |E|) most suspicious pairs; ties go to the smaller pair."""
    k = math.ceil(fraction * len(scores))
    order = sorted(range(len(scores)), key=lambda i: (-scores.values[i], scores.pairs[i]))
    return [scores.pairs[i] for i in order[:k]]


def fit_lp_filter_ggd(g: Graph, seed: int, gen_stride: int = 1, lp_scores: EdgeScores | None = None) -> GgdModel:
    """Train the generation model on g minus the LP-flagged half of its edges."""
    if g.num_edges < 2:
        raise DomainError("filtering needs at least two edges")
    if lp_scores is None:
        lp_scores = lp_pair_scores(train_lp(g, substream_seed(seed, "lp")), g)
    filtered = g.without_edges(filter_edges(lp_scores))
    return train_ggd(filtered, substream_seed(seed, "train"), gen_stride=gen_stride)


def lp_filter_ggd(g: Graph, seed: int, targets=None, gen_stride: int = 1) -> EdgeScores:
    m = fit_lp_filter_ggd(g, seed, gen_stride)
    scores = ggd_detect(m, g, targets, substream_seed(seed, "detect"))
    return scores.with_values(scores.values, "lp+ggd")
