#!/usr/bin/env python3
"""Multi-seed citation benchmark: plain GCN vs the attentive variant.

Trains both models on a planetoid dataset over a seed range and prints
mean/std test accuracy plus the paired lift.  Needs the .content and
.cites files under --data-root (see README for where to put them).
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gsagcn.data import load_planetoid, make_full_split, make_semi_split
from gsagcn.gnn import model_forward, uniform_spec
from gsagcn.graph import normalize_adjacency
from gsagcn.train import TrainConfig, evaluate, train_node_classifier


def locate(root: Path, name: str):
    for content in (root / f"{name}.content", root / name / f"{name}.content"):
        cites = content.with_suffix(".cites")
        if content.exists() and cites.exists():
            return content, cites
    sys.exit(f"error: {name}.content/.cites not found under {root}")


def run_once(ds, task, attention, seed, args):
    if task == "semi":
        split = ds.with_split(*make_semi_split(ds.labels))
    else:
        split = ds.with_split(*make_full_split(ds.labels, seed=seed))
    spec = uniform_spec(
        ds.feature_dim, args.hidden, ds.num_classes,
        num_layers=args.layers, attention=attention, dropout_rate=args.dropout,
    )
    cfg = TrainConfig(
        learning_rate=args.learning_rate, weight_decay=args.weight_decay,
        epochs=args.epochs, patience=args.patience, seed=seed,
    )
    params, _ = train_node_classifier(spec, split, cfg)
    logits, _ = model_forward(spec, params, normalize_adjacency(split.graph), split.x)
    return 100.0 * evaluate(logits, split.labels, split.test_mask)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dataset", help="planetoid name, e.g. cora or citeseer")
    ap.add_argument("--task", choices=("semi", "full"), default="semi")
    ap.add_argument("--data-root", type=Path, default=Path("data"))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--dropout", type=float, default=0.5)
    ap.add_argument("--learning-rate", type=float, default=0.01)
    ap.add_argument("--weight-decay", type=float, default=5e-4)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--patience", type=int, default=10)
    args = ap.parse_args()

    content, cites = locate(args.data_root, args.dataset)
    ds = load_planetoid(content, cites, row_normalize_features=True)
    print(f"{args.dataset}: {ds.graph.n} nodes, {ds.graph.num_edges} edges, "
          f"{ds.feature_dim} features, {ds.num_classes} classes")

    results = {}
    for label, attention in (("gcn", False), ("gsa-gcn", True)):
        accs = np.array([
            run_once(ds, args.task, attention, s, args) for s in range(args.seeds)
        ])
        results[label] = accs
        print(f"{label:8s} {accs.mean():6.2f} +- {accs.std():.2f}  "
              f"({' '.join(f'{a:.1f}' for a in accs)})")
    lift = results["gsa-gcn"] - results["gcn"]
    print(f"paired lift {lift.mean():+.2f} +- {lift.std():.2f} "
          f"over {args.seeds} seeds")


if __name__ == "__main__":
    main()
