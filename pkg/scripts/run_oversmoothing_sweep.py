#!/usr/bin/env python3
"""Depth sweep over a gamma grid, driving the oversmooth subcommand.

Each gamma value gets its own output directory with dm_trace CSVs and a
train-accuracy summary; this script then merges the summaries into one
table on stdout.
"""
import argparse
import csv
import subprocess
import sys
from pathlib import Path


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/oversmooth"))
    ap.add_argument("--dataset", default="synth")
    ap.add_argument("--depths", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.1, 0.5, 1.0])
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--hidden", type=int, default=16)
    args = ap.parse_args()

    merged = []
    for gamma in args.gammas:
        out = args.out / f"gamma_{gamma}"
        cmd = [
            "gsagcn", "oversmooth",
            "--out", str(out),
            "--dataset", args.dataset,
            "--depths", *[str(d) for d in args.depths],
            "--gamma", str(gamma),
            "--epochs", str(args.epochs),
            "--hidden", str(args.hidden),
        ]
        print("+", " ".join(cmd), file=sys.stderr)
        subprocess.run(cmd, check=True)
        with open(out / "oversmooth_summary.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                merged.append({"gamma": gamma, **row})

    width = max(len(k) for k in merged[0])
    print(f"{'gamma':>{width}} {'depth':>{width}} "
          f"{'train_acc_gcn':>{width}} {'train_acc_gsa':>{width}}")
    for row in merged:
        print(f"{row['gamma']:>{width}} {row['depth']:>{width}} "
              f"{row['train_acc_gcn']:>{width}} {row['train_acc_gsa']:>{width}}")


if __name__ == "__main__":
    main()
