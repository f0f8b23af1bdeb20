#!/usr/bin/env python3
"""Compare final personal test accuracy of all five algorithms on one setup.

Runs each algorithm over several seeds on the same data/topology and
prints a mean +/- std table, mirroring the kind of comparison used to
judge whether partial-model personalization beats full-model gossip.

Example:
  python3 scripts/compare_algorithms.py --partition pathological --topology ring --seeds 3
"""

import argparse
import sys
import time

import numpy as np

from dfedsim.config import parse_config_text
from dfedsim.protocol import run_experiment

TEMPLATE = """
algorithm = {algo}
seed = {seed}
rounds = {rounds}
topology.kind = {topology}
topology.m = {m}
data.C = 10
data.d = 16
data.n_per_class = 100
data.class_sep = 6.0
data.partition = {partition}
data.alpha = {alpha}
data.c_per_client = 2
model.layer_dims = 16,3,10
model.split_index = 1
optim.eta_u = 0.1
optim.eta_v = 0.05
optim.decay = 0.01
optim.rho = {rho}
round.K_u_epochs = 5
round.K_v_epochs = {kv}
round.batch_size = 32
"""

ALGORITHMS = ("local", "dfedavg", "dfedavgm", "dfedalt", "dfedsalt")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--partition", choices=("dirichlet", "pathological"), default="pathological")
    parser.add_argument("--topology", default="ring")
    parser.add_argument("--m", type=int, default=16)
    parser.add_argument("--alpha", type=float, default=0.3)
    parser.add_argument("--rho", type=float, default=0.05)
    parser.add_argument("--rounds", type=int, default=50)
    parser.add_argument("--seeds", type=int, default=3)
    args = parser.parse_args()

    kv = 5 if args.partition == "pathological" else 1
    print(f"# partition={args.partition} topology={args.topology} m={args.m} "
          f"rounds={args.rounds} seeds={args.seeds}")
    print(f"{'algorithm':<10s} {'acc_mean':>9s} {'acc_std':>8s} {'loss':>8s} {'secs':>6s}")
    for algo in ALGORITHMS:
        accs, losses = [], []
        t0 = time.perf_counter()
        for seed in range(1, args.seeds + 1):
            cfg = parse_config_text(TEMPLATE.format(
                algo=algo, seed=seed, rounds=args.rounds, topology=args.topology,
                m=args.m, partition=args.partition, alpha=args.alpha,
                rho=args.rho, kv=kv,
            ))
            records, _ = run_experiment(cfg)
            accs.append(records[-1].mean_personal_acc)
            losses.append(records[-1].mean_train_loss)
        print(f"{algo:<10s} {np.mean(accs):9.4f} {np.std(accs):8.4f} "
              f"{np.mean(losses):8.4f} {time.perf_counter() - t0:6.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
