"""Tabular and figure output for experiment reports, ROC curves and target scenes."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .graph import canonical
from .scores import EdgeScores


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def dump_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def report_rows(report: dict) -> list[dict]:
    """One row per (target, detector)."""
    rows = []
    for rec in report["targets"]:
        for name in report["detectors"]:
            rows.append({"target": "" if rec["target"] is None else rec["target"], "degree": rec["degree"] or "",
                         "num_added": len(rec["added_edges"]), "detector": name,
                         "auc": format(rec["auc"][name], ".17g")})
    return rows


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["target", "degree", "num_added", "detector", "auc"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(report_rows(report))
    return buf.getvalue()


def roc_curve(scores: EdgeScores, malicious) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) with tied scores entered as one diagonal step."""
    bad = set(canonical(*e) for e in malicious)
    labels = np.array([p in bad for p in scores.pairs])
    order = np.argsort(-scores.values, kind="stable")
    vals, labs = scores.values[order], labels[order]
    cut = np.r_[np.flatnonzero(np.diff(vals) != 0), len(vals) - 1]
    tp, fp = np.cumsum(labs)[cut], np.cumsum(~labs)[cut]
    pos, neg = max(labs.sum(), 1), max((~labs).sum(), 1)
    return np.r_[0.0, fp / neg], np.r_[0.0, tp / pos]


def plot_aggregate(report: dict, path) -> None:
    plt = _pyplot()
    names = [n for n in report["detectors"] if report["aggregate_auc"].get(n) is not None]
    vals = [report["aggregate_auc"][n] for n in names]
    fig, ax = plt.subplots(figsize=(1.2 * max(3, len(names)) + 1, 3.2))
    ax.bar(names, vals, color="tab:blue")
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax.set_ylim(0, 1)
    ax.set_ylabel("mean AUC")
    ax.set_title(f"{report['profile']} attack, {len(report['targets'])} targets")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_per_target(report: dict, path) -> None:
    plt = _pyplot()
    recs = report["targets"]
    names = report["detectors"]
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(recs) * len(names) / 2 + 2), 3.2))
    width = 0.8 / max(1, len(names))
    x = np.arange(len(recs))
    for i, name in enumerate(names):
        ax.bar(x + i * width, [r["auc"][name] for r in recs], width, label=name)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(["meta" if r["target"] is None else str(r["target"]) for r in recs])
    ax.set_ylim(0, 1)
    ax.set_xlabel("target")
    ax.set_ylabel("AUC")
    ax.legend(fontsize=7, ncol=min(4, len(names)))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_roc(curves: dict, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(3.6, 3.4))
    for name, (fpr, tpr) in curves.items():
        ax.plot(fpr, tpr, label=name, drawstyle="default")
    ax.plot([0, 1], [0, 1], color="grey", lw=0.8, ls="--")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def scene_layout(scene: dict) -> dict[int, tuple[float, float]]:
    """Target at the origin, hop-1 and hop-2 nodes on concentric rings."""
    pos = {}
    rings: dict[int, list[int]] = {}
    for node in scene["nodes"]:
        rings.setdefault(node["hop"], []).append(node["id"])
    for hop, ids in rings.items():
        for k, v in enumerate(ids):
            ang = 2 * math.pi * k / len(ids)
            pos[v] = (hop * math.cos(ang), hop * math.sin(ang))
    return pos


def plot_scene(scene: dict, path) -> None:
    plt = _pyplot()
    pos = scene_layout(scene)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for e in scene["edges"]:
        (x0, y0), (x1, y1) = pos[e["u"]], pos[e["v"]]
        ax.plot([x0, x1], [y0, y1], color="red" if e["malicious"] else "lightgrey",
                lw=2.0 if e["malicious"] else 0.8, zorder=1)
    colors = {0: "tab:blue", 1: "tab:orange"}
    for node in scene["nodes"]:
        x, y = pos[node["id"]]
        ax.scatter([x], [y], s=60 if node["id"] == scene["target"] else 18,
                   c=colors.get(node["label"], "tab:green"), edgecolors="black" if node["hop"] == 0 else "none",
                   zorder=2)
    ax.set_title(f"target {scene['target']}")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_bundle(report: dict, out_json, figures: bool = True) -> list[Path]:
    """report.json, a CSV of per-target AUCs next to it, and figures when asked."""
    out_json = Path(out_json)
    dump_json(report, out_json)
    written = [out_json]
    csv_path = out_json.with_suffix(".csv")
    csv_path.write_text(report_csv(report), encoding="utf-8")
    written.append(csv_path)
    if figures and report["targets"]:
        agg = out_json.with_name(out_json.stem + "_auc.png")
        per = out_json.with_name(out_json.stem + "_targets.png")
        plot_aggregate(report, agg)
        plot_per_target(report, per)
        written += [agg, per]
    return written
