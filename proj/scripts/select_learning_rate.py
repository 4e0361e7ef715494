#!/usr/bin/env python3
# Copyright 2026 The Tailcast Authors.
# SPDX-License-Identifier: Apache-2.0
"""Pick a learning rate per (strategy, training subset) from a grid.

Each arm is trained once per grid value on a selection seed and scored by its
own early-stopping loss on the validation extremes. Test data is never read.
Diverged runs score +inf.
"""
import argparse
import json
import math
import subprocess
import sys

ARMS = [("unweighted", "both"), ("meta", "both"), ("unweighted", "extreme_only")]


def run(binary, config, out, seed, strategy, subset, lr):
    cmd = [binary, "train", "--config", config, "--out", out, "--seed", str(seed),
           "--override", f'train.strategy="{strategy}"',
           "--override", f'train.training_subset="{subset}"',
           "--override", f"train.learning_rate={lr}"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        if "divergence" in proc.stderr:
            return math.inf
        sys.exit(proc.stderr)
    return json.loads(proc.stdout)["runs"][0]["best_eval_loss"]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--binary", default="build/tools/tailcast")
    p.add_argument("--config", default="configs/desk_synth.json")
    p.add_argument("--out", default="runs/lr_select")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4, 0.8, 1.6])
    args = p.parse_args()

    chosen = {}
    for strategy, subset in ARMS:
        scores = {lr: run(args.binary, args.config, args.out, args.seed, strategy, subset, lr) for lr in args.grid}
        best = min(scores, key=lambda lr: (scores[lr], lr))
        chosen[f"{strategy}/{subset}"] = best
        print(f"{strategy:>10} {subset:<12} " + " ".join(f"{lr:g}:{s:.3g}" for lr, s in scores.items())
              + f"  -> {best:g}", flush=True)
    print(json.dumps(chosen, indent=2))


if __name__ == "__main__":
    main()
