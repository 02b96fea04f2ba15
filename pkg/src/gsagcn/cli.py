"""Command line surface: training runs, diagnostics, data generation.

Configuration precedence is flags over TOML config file over built-in
defaults; the run manifest records the fully resolved result.  Every
command writes ``manifest.json`` into its output directory, and the
numeric artifacts a command emits are byte-identical across reruns of
the same resolved configuration.

Exit codes: 0 success, 1 runtime error or failed check, 2 usage error,
3 training divergence, 5 boundary verdict (lemma suite at gamma 0).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ._seeding import STREAM_SAMPLING, substream
from .data import (
    NodeDataset,
    SynthConfig,
    gen_feature_sbm,
    gen_graph_classification,
    load_node_dataset,
    load_planetoid,
    make_full_split,
    make_semi_split,
    save_node_dataset,
)
from .diagnostics import (
    DEFAULT_EPS,
    check_lemma_pd,
    check_singular_amplification,
    dropedge_simulation,
    identity_attention_params,
    loss_decomposition,
    oversmooth_trace,
    sample_lemma_instance,
    sample_p_matrix,
    trace_spec,
    write_dm_trace_csv,
)
from .exceptions import DivergenceError, GsaGcnError, ParameterError
from .gnn import model_forward, uniform_spec
from .graph import largest_connected_component, normalize_adjacency
from .manifest import (
    RunManifest,
    fingerprint_config,
    fingerprint_files,
    load_checkpoint,
    save_checkpoint,
    write_manifest,
)
from .numkernel import max_singular_value
from .train import (
    TrainConfig,
    _assemble_batch,
    _graph_logits,
    cross_entropy_masked,
    evaluate,
    train_graph_classifier,
    train_node_classifier,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_BOUNDARY = 5

PLANETOID_NAMES = ("cora", "citeseer", "pubmed")

_DATASET_DEFAULTS = {
    "dataset": "synth",
    "data_root": "data",
    "row_normalize": False,
    "split_seed": 0,
    "synth_n": 2000,
    "synth_classes": 4,
    "synth_p_in": 0.05,
    "synth_p_out": 0.005,
    "synth_dim": 16,
    "synth_noise": 0.5,
    "synth_boost": 0.0,
    "synth_seed": 0,
}

TRAIN_DEFAULTS = {
    **_DATASET_DEFAULTS,
    "task": "semi",
    "model": "gcn",
    "hidden": 16,
    "layers": 2,
    "dropout": 0.5,
    "learning_rate": 0.01,
    "weight_decay": None,  # resolved per task: 5e-4 node, 1e-4 graph
    "epochs": 200,
    "patience": 10,
    "batch_size": 32,
    "seed": 0,
    "gamma_freeze": None,
    "attn_divisor": 8,
}

EVAL_DEFAULTS = {
    **_DATASET_DEFAULTS,
    "task": "semi",
    "checkpoint": None,
}

OVERSMOOTH_DEFAULTS = {
    **_DATASET_DEFAULTS,
    "task": "semi",
    "depths": [2, 4, 8, 16, 32],
    "hidden": 16,
    "dropout": 0.5,
    "learning_rate": 0.01,
    "weight_decay": 5e-4,
    "epochs": 200,
    "patience": 0,
    "seed": 0,
    "gamma": 0.5,
    "attn_divisor": 8,
}

LEMMAS_DEFAULTS = {
    "n_instances": 100,
    "gamma": 0.5,
    "eps": DEFAULT_EPS,
    "seed": 0,
}

DROPEDGE_DEFAULTS = {
    "n": [4, 6, 8, 12, 16, 60, 64],
    "r": [1, 2],
    "d": None,  # per-n default: min(4, n-1)
    "seed": 0,
}

DECOMPOSE_DEFAULTS = {
    **_DATASET_DEFAULTS,
    "task": "semi",
    "checkpoint": None,
    "similarity": "cross",
    "include_diagonal": True,
}

GEN_SYNTH_DEFAULTS = {
    "n": 400,
    "classes": 4,
    "p_in": 0.1,
    "p_out": 0.01,
    "dim": 16,
    "noise": 0.5,
    "boost": 0.0,
    "seed": 0,
    "split": "full",
    "split_seed": 0,
    "train_frac": 0.6,
    "val_frac": 0.2,
}


def _resolve(defaults: dict, section: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the TOML section, then explicitly set flags."""
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "rb") as fh:
            doc = tomllib.load(fh)
        table = doc.get(section, {})
        unknown = sorted(set(table) - set(defaults))
        if unknown:
            raise ParameterError(
                f"unknown [{section}] config keys: {', '.join(unknown)}"
            )
        resolved.update(table)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _check_choice(resolved: dict, key: str, choices: tuple[str, ...]) -> None:
    if resolved[key] not in choices:
        raise ParameterError(f"{key} must be one of {', '.join(choices)}")


def _out_dir(out: str) -> Path:
    root = os.environ.get("GSAGCN_OUT_ROOT")
    path = Path(out)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(
    out: Path, command: str, resolved: dict, seed: int, fingerprint: str,
    started: float,
) -> None:
    from . import __version__

    write_manifest(
        RunManifest(
            command=command,
            config=resolved,
            seed=seed,
            dataset_fingerprint=fingerprint,
            artifact_version=__version__,
            duration_s=time.perf_counter() - started,
        ),
        out / "manifest.json",
    )


def _synth_node_config(resolved: dict) -> SynthConfig:
    return SynthConfig(
        n=resolved["synth_n"],
        num_classes=resolved["synth_classes"],
        p_in=resolved["synth_p_in"],
        p_out=resolved["synth_p_out"],
        feature_dim=resolved["synth_dim"],
        feature_noise=resolved["synth_noise"],
        cross_class_edge_boost=resolved["synth_boost"],
        seed=resolved["synth_seed"],
    )


def _planetoid_paths(root: Path, name: str) -> tuple[Path, Path]:
    for base in (root, root / name):
        content = base / f"{name}.content"
        cites = base / f"{name}.cites"
        if content.exists() and cites.exists():
            return content, cites
    raise ParameterError(
        f"dataset '{name}' not found: place {name}.content and {name}.cites "
        f"under {root}/ or {root}/{name}/"
    )


def _load_node(resolved: dict) -> tuple[NodeDataset, str]:
    """Node dataset plus its content fingerprint, split attached."""
    name = resolved["dataset"]
    if name == "synth":
        cfg = _synth_node_config(resolved)
        ds = gen_feature_sbm(cfg)
        fingerprint = fingerprint_config({"generator": "feature_sbm", **asdict(cfg)})
    elif name in PLANETOID_NAMES:
        content, cites = _planetoid_paths(Path(resolved["data_root"]), name)
        ds = load_planetoid(
            content, cites, row_normalize_features=resolved["row_normalize"]
        )
        fingerprint = fingerprint_files([content, cites])
    else:
        dirpath = Path(name)
        if not dirpath.is_dir():
            raise ParameterError(
                f"dataset must be synth, {', '.join(PLANETOID_NAMES)}, or a "
                f"saved dataset directory; got '{name}'"
            )
        ds = load_node_dataset(dirpath)
        files = [dirpath / "edges.tsv", dirpath / "features.csv"]
        if (dirpath / "masks.csv").exists():
            files.append(dirpath / "masks.csv")
        fingerprint = fingerprint_files(files)
    if ds.train_mask is None:
        if resolved["task"] == "semi":
            masks = make_semi_split(ds.labels, seed=resolved["split_seed"])
        else:
            masks = make_full_split(ds.labels, seed=resolved["split_seed"])
        ds = ds.with_split(*masks)
    return ds, fingerprint


def _load_graphs(resolved: dict):
    if resolved["dataset"] != "synth":
        raise ParameterError("graph tasks support only the synthetic corpus")
    cfg = _synth_node_config(resolved)
    ds = gen_graph_classification(cfg)
    return ds, fingerprint_config({"generator": "graph_corpus", **asdict(cfg)})


def _node_metrics(spec, params, ds) -> dict:
    na = normalize_adjacency(ds.graph)
    logits, _ = model_forward(spec, params, na, ds.x)
    train_loss, _ = cross_entropy_masked(logits, ds.labels, ds.train_mask)
    val_loss, _ = cross_entropy_masked(logits, ds.labels, ds.val_mask)
    return {
        "train_loss": train_loss,
        "train_acc": evaluate(logits, ds.labels, ds.train_mask),
        "val_loss": val_loss,
        "val_acc": evaluate(logits, ds.labels, ds.val_mask),
        "test_acc": evaluate(logits, ds.labels, ds.test_mask),
    }


def _graph_metrics(spec, params, ds) -> dict:
    nas = [normalize_adjacency(item.graph) for item in ds.items]
    xs = [item.x for item in ds.items]
    labels = np.array([item.label for item in ds.items], dtype=np.int64)

    def split_eval(indices):
        losses, hits, seen = 0.0, 0.0, 0
        for start in range(0, len(indices), 256):
            chunk = indices[start:start + 256]
            na, x, sizes = _assemble_batch(nas, xs, chunk)
            logits, _ = _graph_logits(spec, params, na, x, sizes)
            rows = np.ones(len(chunk), dtype=bool)
            loss, _ = cross_entropy_masked(logits, labels[chunk], rows)
            losses += loss * len(chunk)
            hits += evaluate(logits, labels[chunk], rows) * len(chunk)
            seen += len(chunk)
        return losses / seen, hits / seen

    train_loss, train_acc = split_eval(ds.train_idx)
    val_loss, val_acc = split_eval(ds.val_idx)
    _, test_acc = split_eval(ds.test_idx)
    return {
        "train_loss": train_loss,
        "train_acc": train_acc,
        "val_loss": val_loss,
        "val_acc": val_acc,
        "test_acc": test_acc,
    }


def cmd_train(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(TRAIN_DEFAULTS, "train", args)
    _check_choice(resolved, "task", ("semi", "full", "graph"))
    _check_choice(resolved, "model", ("gcn", "gsa-gcn"))
    if resolved["weight_decay"] is None:
        resolved["weight_decay"] = 1e-4 if resolved["task"] == "graph" else 5e-4
    out = _out_dir(args.out)

    cfg = TrainConfig(
        learning_rate=resolved["learning_rate"],
        weight_decay=resolved["weight_decay"],
        epochs=resolved["epochs"],
        seed=resolved["seed"],
        patience=resolved["patience"],
        dropout=resolved["dropout"],
        batch_size=resolved["batch_size"],
    )
    attention = resolved["model"] == "gsa-gcn"
    if resolved["task"] == "graph":
        ds, fingerprint = _load_graphs(resolved)
        num_classes, feature_dim = ds.num_classes, ds.feature_dim
    else:
        ds, fingerprint = _load_node(resolved)
        num_classes, feature_dim = ds.num_classes, ds.feature_dim
    spec = uniform_spec(
        feature_dim,
        resolved["hidden"],
        num_classes,
        num_layers=resolved["layers"],
        attention=attention,
        dropout_rate=resolved["dropout"],
        attn_dim_divisor=resolved["attn_divisor"],
    )
    if resolved["task"] == "graph":
        params, records = train_graph_classifier(
            spec, ds, cfg, gamma_freeze=resolved["gamma_freeze"]
        )
    else:
        params, records = train_node_classifier(
            spec, ds, cfg, gamma_freeze=resolved["gamma_freeze"]
        )

    with open(out / "metrics.jsonl", "w", encoding="ascii") as fh:
        for record in records:
            fh.write(json.dumps(asdict(record), sort_keys=True))
            fh.write("\n")
    save_checkpoint(out / "params.bin", spec, params)
    _finish(out, "train", resolved, resolved["seed"], fingerprint, started)
    print(json.dumps(asdict(records[-1]), sort_keys=True))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(EVAL_DEFAULTS, "eval", args)
    _check_choice(resolved, "task", ("semi", "full", "graph"))
    if not resolved["checkpoint"]:
        raise ParameterError("--checkpoint is required")
    out = _out_dir(args.out)
    spec, params = load_checkpoint(resolved["checkpoint"])
    if resolved["task"] == "graph":
        ds, fingerprint = _load_graphs(resolved)
        metrics = _graph_metrics(spec, params, ds)
    else:
        ds, fingerprint = _load_node(resolved)
        metrics = _node_metrics(spec, params, ds)
    blob = json.dumps(metrics, sort_keys=True)
    with open(out / "eval.json", "w", encoding="ascii") as fh:
        fh.write(blob)
        fh.write("\n")
    _finish(out, "eval", resolved, resolved["split_seed"], fingerprint, started)
    print(blob)
    return EXIT_OK


def _trace_dataset(ds: NodeDataset, width: int, seed: int) -> NodeDataset:
    """Largest component with features projected to the trace width."""
    lcc, node_ids = largest_connected_component(ds.graph)
    rng = substream(seed, STREAM_SAMPLING, 10_000)
    proj = rng.standard_normal((ds.x.shape[1], width)) / np.sqrt(ds.x.shape[1])
    return NodeDataset(
        graph=lcc,
        x=ds.x[node_ids] @ proj,
        labels=np.zeros(lcc.n, dtype=np.int64),
        num_classes=1,
    )


def cmd_oversmooth(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(OVERSMOOTH_DEFAULTS, "oversmooth", args)
    _check_choice(resolved, "task", ("semi", "full"))
    out = _out_dir(args.out)
    ds, fingerprint = _load_node(resolved)
    cfg = TrainConfig(
        learning_rate=resolved["learning_rate"],
        weight_decay=resolved["weight_decay"],
        epochs=resolved["epochs"],
        seed=resolved["seed"],
        patience=resolved["patience"],
        dropout=resolved["dropout"],
    )
    width = resolved["hidden"]
    trace_ds = _trace_dataset(ds, width, resolved["seed"])
    trace_rng = substream(resolved["seed"], STREAM_SAMPLING, 10_001)

    rows = []
    last_report = None
    for depth in resolved["depths"]:
        accs = {}
        for label, attention in (("gcn", False), ("gsa", True)):
            spec = uniform_spec(
                ds.feature_dim,
                width,
                ds.num_classes,
                num_layers=depth,
                attention=attention,
                dropout_rate=resolved["dropout"],
                attn_dim_divisor=resolved["attn_divisor"],
            )
            params, _ = train_node_classifier(spec, ds, cfg)
            na = normalize_adjacency(ds.graph)
            logits, _ = model_forward(spec, params, na, ds.x)
            accs[label] = evaluate(logits, ds.labels, ds.train_mask)
        rows.append((depth, accs["gcn"], accs["gsa"]))

        # Shared-weight propagation trace at this depth: contractive
        # random square weights, identity attention transforms.
        weights = []
        for _ in range(depth):
            w = trace_rng.standard_normal((width, width))
            weights.append(0.9 * w / max_singular_value(w).value)
        report = oversmooth_trace(
            trace_spec(width, depth),
            identity_attention_params(weights, resolved["gamma"]),
            trace_ds,
            depth,
        )
        write_dm_trace_csv(report, out / f"dm_trace_d{depth}.csv")
        last_report = report
        print(
            f"depth={depth} train_acc_gcn={accs['gcn']:.4f} "
            f"train_acc_gsa={accs['gsa']:.4f}"
        )

    with open(out / "oversmooth_summary.csv", "w", encoding="ascii") as fh:
        fh.write("depth,train_acc_gcn,train_acc_gsa\n")
        for depth, a_gcn, a_gsa in rows:
            fh.write(f"{depth},{a_gcn:.17g},{a_gsa:.17g}\n")
    if last_report is not None:
        write_dm_trace_csv(last_report, out / "dm_trace.csv")
    _finish(out, "oversmooth", resolved, resolved["seed"], fingerprint, started)
    return EXIT_OK


def cmd_lemmas(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(LEMMAS_DEFAULTS, "lemmas", args)
    if resolved["gamma"] < 0:
        raise ParameterError("gamma must be non-negative")
    out = _out_dir(args.out)
    gamma = resolved["gamma"]
    boundary = gamma == 0.0

    lines = []
    pd_pass = amp_pass = sandwich_pass = 0
    total = resolved["n_instances"]
    for index in range(total):
        inst = sample_lemma_instance(
            index, base_seed=resolved["seed"], eps=resolved["eps"]
        )
        row = {"index": index, "n": inst.g.n, "width": inst.h.shape[1]}
        amp = check_singular_amplification(
            inst.h, inst.g, inst.eps, gamma, inst.w, inst.bhat_seed
        )
        row.update(s=amp.s, s_tilde=amp.s_tilde, amp_pass=amp.passed)
        if boundary:
            row.update(boundary=True, sandwich_pass=amp.s_tilde == amp.s)
        else:
            pd = check_lemma_pd(inst.h, inst.g, inst.eps, gamma, inst.bhat_seed)
            p = sample_p_matrix(inst.h, inst.g, inst.eps, gamma, inst.bhat_seed)
            sigma_max = max_singular_value(p).value
            slack = 1e-9 * max(amp.s, 1.0)
            row.update(
                lambda_min_p=pd.lambda_min_p,
                sigma_min_p=pd.sigma_min_p,
                sigma_max_p=sigma_max,
                pd_pass=pd.passed,
                sandwich_pass=bool(
                    pd.sigma_min_p * amp.s <= amp.s_tilde + slack
                    and amp.s_tilde <= sigma_max * amp.s + slack
                ),
            )
            pd_pass += pd.passed
        amp_pass += amp.passed
        sandwich_pass += row["sandwich_pass"]
        lines.append(json.dumps(row, sort_keys=True))

    with open(out / "lemmas.jsonl", "w", encoding="ascii") as fh:
        for line in lines:
            print(line)
            fh.write(line)
            fh.write("\n")
    _finish(out, "lemmas", resolved, resolved["seed"], "none", started)
    if boundary:
        print(f"boundary: gamma=0 gives s_tilde=s on all {total} instances")
        return EXIT_BOUNDARY if sandwich_pass == total else EXIT_FAILURE
    print(f"pd_pass={pd_pass}/{total} amp_pass={amp_pass}/{total}")
    all_good = pd_pass == amp_pass == sandwich_pass == total
    return EXIT_OK if all_good else EXIT_FAILURE


def _default_degree(n: int) -> int:
    return min(4, n - 1)


def cmd_dropedge_sim(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(DROPEDGE_DEFAULTS, "dropedge-sim", args)
    out = _out_dir(args.out)
    rows = []
    ok = True
    for r in resolved["r"]:
        for n in resolved["n"]:
            d = resolved["d"] if resolved["d"] is not None else _default_degree(n)
            report = dropedge_simulation(n, d, r, seed=resolved["seed"])
            rows.append(report)
            ok = ok and report.eliminated_count >= report.guaranteed_count
            print(
                f"n={report.n} d={report.d} r={report.r} "
                f"eliminated={report.eliminated_count} "
                f"guaranteed={report.guaranteed_count}"
            )
    with open(out / "dropedge.csv", "w", encoding="ascii") as fh:
        fh.write("n,d,r,eliminated,guaranteed\n")
        for report in rows:
            fh.write(
                f"{report.n},{report.d},{report.r},"
                f"{report.eliminated_count},{report.guaranteed_count}\n"
            )
    _finish(out, "dropedge-sim", resolved, resolved["seed"], "none", started)
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_decompose_loss(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(DECOMPOSE_DEFAULTS, "decompose-loss", args)
    _check_choice(resolved, "task", ("semi", "full"))
    _check_choice(resolved, "similarity", ("cross", "self"))
    if not resolved["checkpoint"]:
        raise ParameterError("--checkpoint is required")
    out = _out_dir(args.out)
    spec, params = load_checkpoint(resolved["checkpoint"])
    ds, fingerprint = _load_node(resolved)
    na = normalize_adjacency(ds.graph)
    _, caches = model_forward(spec, params, na, ds.x)
    last_cache = caches.layers[-1]
    last = params[-1]
    n = ds.graph.n
    if spec.attention[-1]:
        mask, gamma = last_cache.mask, last.gamma
    else:
        mask, gamma = np.full((n, n), 1.0 / n), 0.0
    dec = loss_decomposition(
        last_cache.h_in,
        last_cache.h_in @ last.w,
        na,
        ds.graph,
        mask,
        gamma,
        similarity=resolved["similarity"],
        include_diagonal=resolved["include_diagonal"],
    )
    geometry = dec.geometry_matrix
    payload = {
        "gamma": dec.gamma,
        "feature_reg": dec.feature_reg,
        "feature_reg_unclamped": dec.feature_reg_unclamped,
        "geometry": {
            "shape": list(geometry.shape),
            "min": float(geometry.min()),
            "max": float(geometry.max()),
            "mean": float(geometry.mean()),
            "frobenius": float(np.linalg.norm(geometry)),
            "equals_normalized_adjacency": bool(
                np.array_equal(geometry, na.mat)
            ),
        },
    }
    blob = json.dumps(payload, sort_keys=True)
    with open(out / "decomposition.json", "w", encoding="ascii") as fh:
        fh.write(blob)
        fh.write("\n")
    _finish(
        out, "decompose-loss", resolved, resolved["split_seed"], fingerprint,
        started,
    )
    print(blob)
    return EXIT_OK


def cmd_gen_synth(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    resolved = _resolve(GEN_SYNTH_DEFAULTS, "gen-synth", args)
    _check_choice(resolved, "split", ("full", "semi", "none"))
    out = _out_dir(args.out)
    cfg = SynthConfig(
        n=resolved["n"],
        num_classes=resolved["classes"],
        p_in=resolved["p_in"],
        p_out=resolved["p_out"],
        feature_dim=resolved["dim"],
        feature_noise=resolved["noise"],
        cross_class_edge_boost=resolved["boost"],
        seed=resolved["seed"],
    )
    ds = gen_feature_sbm(cfg)
    if resolved["split"] == "full":
        ds = ds.with_split(*make_full_split(
            ds.labels,
            train_frac=resolved["train_frac"],
            val_frac=resolved["val_frac"],
            seed=resolved["split_seed"],
        ))
    elif resolved["split"] == "semi":
        ds = ds.with_split(*make_semi_split(
            ds.labels, seed=resolved["split_seed"]
        ))
    save_node_dataset(ds, out)
    fingerprint = fingerprint_config({"generator": "feature_sbm", **asdict(cfg)})
    _finish(out, "gen-synth", resolved, resolved["seed"], fingerprint, started)
    print(f"wrote {out} (n={cfg.n}, classes={cfg.num_classes})")
    return EXIT_OK


def _add_dataset_args(sub: argparse.ArgumentParser, graph_ok: bool) -> None:
    tasks = ("semi", "full", "graph") if graph_ok else ("semi", "full")
    sub.add_argument("--dataset", help="synth, a planetoid name, or a saved dataset directory")
    sub.add_argument("--task", choices=tasks, help="split style (default semi)")
    sub.add_argument("--data-root", help="directory holding planetoid files (default data)")
    sub.add_argument("--row-normalize", action="store_const", const=True,
                     help="row-normalize loaded planetoid features")
    sub.add_argument("--split-seed", type=int, help="seed for mask generation (default 0)")
    sub.add_argument("--synth-n", type=int, help="synthetic node or graph count")
    sub.add_argument("--synth-classes", type=int)
    sub.add_argument("--synth-p-in", type=float)
    sub.add_argument("--synth-p-out", type=float)
    sub.add_argument("--synth-dim", type=int)
    sub.add_argument("--synth-noise", type=float)
    sub.add_argument("--synth-boost", type=float)
    sub.add_argument("--synth-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsagcn",
        description="Graph networks with a global self-attention term: "
        "training, geometry diagnostics, and synthetic data.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--config", help="TOML config file ([command] tables)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", parents=[common], help="train one model")
    _add_dataset_args(p_train, graph_ok=True)
    p_train.add_argument("--model", choices=("gcn", "gsa-gcn"))
    p_train.add_argument("--hidden", type=int)
    p_train.add_argument("--layers", type=int)
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--learning-rate", type=float)
    p_train.add_argument("--weight-decay", type=float)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--patience", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--gamma-freeze", type=float,
                         help="pin every gamma to this value for the whole run")
    p_train.add_argument("--attn-divisor", type=int)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", parents=[common],
                            help="evaluate a checkpoint on a dataset")
    _add_dataset_args(p_eval, graph_ok=True)
    p_eval.add_argument("--checkpoint", help="params.bin from a training run")
    p_eval.set_defaults(func=cmd_eval)

    p_over = sub.add_parser("oversmooth", parents=[common],
                            help="depth sweep plus collapse traces")
    _add_dataset_args(p_over, graph_ok=False)
    p_over.add_argument("--depths", type=int, nargs="+")
    p_over.add_argument("--hidden", type=int)
    p_over.add_argument("--dropout", type=float)
    p_over.add_argument("--learning-rate", type=float)
    p_over.add_argument("--weight-decay", type=float)
    p_over.add_argument("--epochs", type=int)
    p_over.add_argument("--patience", type=int)
    p_over.add_argument("--seed", type=int)
    p_over.add_argument("--gamma", type=float,
                        help="attention strength for the shared-weight trace")
    p_over.add_argument("--attn-divisor", type=int)
    p_over.set_defaults(func=cmd_oversmooth)

    p_lem = sub.add_parser("lemmas", parents=[common],
                           help="eigenvalue and amplification checks")
    p_lem.add_argument("--n-instances", type=int)
    p_lem.add_argument("--gamma", type=float)
    p_lem.add_argument("--eps", type=float)
    p_lem.add_argument("--seed", type=int)
    p_lem.set_defaults(func=cmd_lemmas)

    p_drop = sub.add_parser("dropedge-sim", parents=[common],
                            help="edge-influence cancellation counts")
    p_drop.add_argument("--n", type=int, nargs="+")
    p_drop.add_argument("--r", type=int, nargs="+", help="cancellations per vertex")
    p_drop.add_argument("--d", type=int, help="regular degree (default min(4, n-1))")
    p_drop.add_argument("--seed", type=int)
    p_drop.set_defaults(func=cmd_dropedge_sim)

    p_dec = sub.add_parser("decompose-loss", parents=[common],
                           help="geometry/feature split of the last layer")
    _add_dataset_args(p_dec, graph_ok=False)
    p_dec.add_argument("--checkpoint", help="params.bin from a training run")
    p_dec.add_argument("--similarity", choices=("cross", "self"))
    p_dec.add_argument("--exclude-diagonal", dest="include_diagonal",
                       action="store_const", const=False,
                       help="drop self-pairs from the geometry complement")
    p_dec.set_defaults(func=cmd_decompose_loss)

    p_gen = sub.add_parser("gen-synth", parents=[common],
                           help="write a synthetic node dataset")
    p_gen.add_argument("--n", type=int)
    p_gen.add_argument("--classes", type=int)
    p_gen.add_argument("--p-in", type=float)
    p_gen.add_argument("--p-out", type=float)
    p_gen.add_argument("--dim", type=int)
    p_gen.add_argument("--noise", type=float)
    p_gen.add_argument("--boost", type=float)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--split", choices=("full", "semi", "none"))
    p_gen.add_argument("--split-seed", type=int)
    p_gen.add_argument("--train-frac", type=float)
    p_gen.add_argument("--val-frac", type=float)
    p_gen.set_defaults(func=cmd_gen_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (GsaGcnError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
