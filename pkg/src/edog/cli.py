"""Command-line entry point: ``edog <subcommand> ...``.

Exit codes: 0 success, 2 domain error, 3 schema or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attack import (AttackResult, Profile, attacked_graph, greedy_target_attack, load_attack, meta_attack,
                     pick_target, save_attack)
from .errors import DomainError, SchemaError
from .gcn import load_model, save_model, train_node_classifier
from .generators import gen_barabasi_albert, gen_erdos_renyi, split_train, synth_annotate
from .graph import load_graph, save_graph
from .metrics import roc_auc
from .numkit import substream_seed
from .pipeline import DETECTORS, DEFAULT_DETECTORS, RANDOM_COUNTS, TRAIN_FRACTION, random_edge_experiment, \
    run_detector, run_experiment, target_scene
from .report import dump_json, plot_roc, plot_scene, roc_curve, write_report_bundle
from .scores import read_scores, write_scores

EXIT_DOMAIN = 2
EXIT_SCHEMA = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def cmd_gen(a) -> None:
    if a.kind == "er":
        if a.p is None:
            raise DomainError("--p is required for er graphs")
        g = gen_erdos_renyi(a.n, a.p, a.seed)
    else:
        g = gen_barabasi_albert(a.n, a.m, a.seed)
    g = synth_annotate(g, dim=a.dim, seed=substream_seed(a.seed, "annotate"))
    g = split_train(g, a.train_fraction, substream_seed(a.seed, "split"))
    save_graph(g, a.out)


def cmd_train(a) -> None:
    g = load_graph(a.graph)
    save_model(train_node_classifier(g, a.seed), a.out)


def cmd_attack(a) -> None:
    g = load_graph(a.graph)
    m = load_model(a.model)
    profile = Profile.parse(a.profile)
    if profile is Profile.META:
        result = meta_attack(g, m, a.seed)
    else:
        if a.target is None:
            if a.targets_by_degree is None:
                raise DomainError("give --target or --targets-by-degree")
            pool = pick_target(g, m, substream_seed(a.seed, "targets"), degree=a.targets_by_degree)
            if not pool:
                raise DomainError(f"no correctly classified node of degree {a.targets_by_degree}")
            a.target = pool[0]
        result = greedy_target_attack(g, m, a.target, profile, a.seed, arbitrary_single=a.arbitrary_single)
    save_attack(result, a.out)
    if a.out_graph:
        save_graph(attacked_graph(g, result), a.out_graph)
    print(json.dumps({"target": result.target, "added": len(result.added_edges), "success": result.success}))


def cmd_detect(a) -> None:
    g = load_graph(a.graph)
    write_scores(run_detector(a.method, g, a.seed, gen_stride=a.gen_stride), a.out)


def cmd_eval(a) -> None:
    scores = read_scores(a.scores)
    attack = load_attack(a.attack)
    print(f"{roc_auc(scores, attack.added_edges):.6f}")
    if a.plot:
        plot_roc({scores.source or "detector": roc_curve(scores, attack.added_edges)}, a.plot)


def cmd_exp(a) -> None:
    try:
        config = json.loads(Path(a.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{a.config}: {exc}") from exc
    if a.timing:
        config["timing"] = True
    report = run_experiment(config)
    for path in write_report_bundle(report, a.out, figures=a.figures):
        print(path)
    if report["warning"]:
        print(f"warning: {report['warning']}", file=sys.stderr)


def cmd_random_edges(a) -> None:
    g = load_graph(a.graph)
    out = random_edge_experiment(g, a.counts, a.seed, a.detectors, a.gen_stride)
    text = json.dumps(out, indent=2, sort_keys=True)
    if a.out:
        Path(a.out).write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_scene(a) -> None:
    g = load_graph(a.graph)
    result: AttackResult = load_attack(a.attack)
    scores = read_scores(a.scores) if a.scores else None
    scene = target_scene(g, result, scores)
    dump_json(scene, a.out)
    if a.png:
        plot_scene(scene, a.png)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edog", description="Detect adversarial edges in attacked graphs.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="generate a labeled synthetic graph")
    s.add_argument("--kind", choices=["er", "ba"], required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=float)
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--dim", type=int, default=20)
    s.add_argument("--train-fraction", type=float, default=TRAIN_FRACTION)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("train", help="train the GCN node classifier")
    s.add_argument("--graph", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("attack", help="insert adversarial edges")
    s.add_argument("--graph", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--profile", choices=[x.value for x in Profile], required=True)
    s.add_argument("--target", type=int)
    s.add_argument("--targets-by-degree", type=int)
    s.add_argument("--arbitrary-single", action="store_true", help="single-edge attack over all node pairs")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--out-graph")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("detect", help="score every edge of a graph")
    s.add_argument("--graph", required=True)
    s.add_argument("--method", choices=DETECTORS, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gen-stride", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("eval", help="AUC of a score file against an attack record")
    s.add_argument("--scores", required=True)
    s.add_argument("--attack", required=True)
    s.add_argument("--plot", help="write a ROC curve PNG here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("exp", help="run a configured experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--figures", dest="figures", action="store_true", default=True)
    s.add_argument("--no-figures", dest="figures", action="store_false")
    s.add_argument("--timing", action="store_true", help="record wall-clock time (breaks byte-identity)")
    s.set_defaults(func=cmd_exp)

    s = sub.add_parser("random-edges", help="top-k ratio of non-random edges after adding random ones")
    s.add_argument("--graph", required=True)
    s.add_argument("--counts", type=_int_list, default=list(RANDOM_COUNTS))
    s.add_argument("--detectors", type=lambda t: t.split(","), default=list(DEFAULT_DETECTORS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gen-stride", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_random_edges)

    s = sub.add_parser("scene", help="JSON scene (and optional PNG) of an attacked target")
    s.add_argument("--graph", required=True)
    s.add_argument("--attack", required=True)
    s.add_argument("--scores")
    s.add_argument("--out", required=True)
    s.add_argument("--png")
    s.set_defaults(func=cmd_scene)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return 0


if __name__ == "__main__":
    sys.exit(main())
