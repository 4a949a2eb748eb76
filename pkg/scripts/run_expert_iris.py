#!/usr/bin/env python3
"""Expert-knowledge comparison on iris.

Trains on the first 15 samples of each class, evaluates on all 150, and
reports the best accuracy over the sparsity grid for four setups:

  1. no expert knowledge (ramp preprocessing, mean-variant ft1)
  2. expert MFs for preprocessing only
  3. expert MFs plus the 45 expert samples (tau 9 per rule)

Setup 3 is the full expert pipeline; an expert-knowledge file for the
command-line interface is written next to the results.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sklearn.datasets import load_iris

from aefrc import make_dataset
from aefrc.evaluation import PipelineConfig, RHO_GRID_DEFAULT, train_pipeline
from aefrc.finetune import ft1
from aefrc.frc import classify_batch, fit_mf_bank, generate_rules
from aefrc.mf import ExpertRule, GaussianMF, PreprocSpec, preprocess, save_expert_file
from aefrc.network import AEConfig, forward, stack
from aefrc.optim import OptimizerConfig
from aefrc.seeding import spawn_seed

# 13 expert Gaussians over sepal length/width, petal length/width, and
# five rules over them; MF indices are 1-based per feature.
EXPERT_MFS = (
    ((5.429, 0.706), (6.347, 0.882)),
    ((2.682, 0.0165), (4.235, 2.118), (2.612, 0.329)),
    ((6.148, 0.463), (1.866, 0.289), (3.950, 0.550)),
    ((0.359, 0.729), (1.394, 1.176), (1.276, 4.706), (2.288, 0.424), (2.076, 2.588)),
)
EXPERT_RULES = (
    ExpertRule((None, 1, None, 1), "versicolor", 9),
    ExpertRule((None, None, 1, 2), "virginica", 9),
    ExpertRule((None, 2, 2, 3), "setosa", 9),
    ExpertRule((1, 3, None, 4), "virginica", 9),
    ExpertRule((2, None, 3, 5), "versicolor", 9),
)


def best_over_grid(evaluate):
    return max((evaluate(rho), rho) for rho in RHO_GRID_DEFAULT)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--arch", default="4,4")
    ap.add_argument("--out", default="expert-out")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    arch = tuple(int(w) for w in args.arch.split(","))

    raw = load_iris()
    full = make_dataset(raw.data, raw.target + 1,
                        label_names=tuple(raw.target_names))
    idx = np.r_[0:15, 50:65, 100:115]
    train = make_dataset(raw.data[idx], raw.target[idx] + 1,
                         label_names=tuple(raw.target_names))
    spec = PreprocSpec(tuple(tuple(GaussianMF(m, s) for m, s in feat)
                             for feat in EXPERT_MFS))
    expert_path = os.path.join(args.out, "iris_expert.json")
    save_expert_file(expert_path, spec, EXPERT_RULES,
                     feature_names=tuple(raw.feature_names))

    def pipeline_eval(cfg):
        def run(rho):
            fp = train_pipeline(train, replace(cfg, ae=replace(cfg.ae, rho=rho)),
                                args.seed)
            return fp.accuracy(full)
        return run

    # expert MFs without the expert samples: preprocessing swapped, no rows added
    def mfs_only(rho):
        xp = preprocess(train, spec)
        net = stack(xp.samples, arch, AEConfig(rho=rho), OptimizerConfig(),
                    spawn_seed(args.seed, "stack"))
        net = ft1(net, xp, OptimizerConfig(), "mean")
        H = forward(net, xp.samples)[-1]
        hidden = xp.with_samples(H)
        rb = generate_rules(hidden, fit_mf_bank(hidden))
        codes = forward(net, preprocess(full, spec).samples)[-1]
        labels, _, _ = classify_batch(rb, codes)
        return float(np.mean(labels == full.labels))

    setups = [
        ("no expert knowledge", pipeline_eval(
            PipelineConfig(hidden_sizes=arch, strategy="ft1", target_stat="mean"))),
        ("expert MFs only", mfs_only),
        ("expert MFs + expert samples", pipeline_eval(
            PipelineConfig(hidden_sizes=arch, strategy="ft1",
                           expert=(spec, EXPERT_RULES)))),
    ]
    print(f"train 45 (first 15 per class), evaluate all 150, seed {args.seed}")
    for name, evaluate in setups:
        (acc, rho) = best_over_grid(evaluate)
        print(f"  {name:30s} accuracy {acc:.4f} (best at rho {rho:.1f})")
    print(f"expert-knowledge file for the CLI written to {expert_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
