#!/usr/bin/env python3
"""Sweep communication topologies for one algorithm and report accuracy,
consensus error, and the spectral gap side by side.

Example:
  python3 scripts/compare_topologies.py --algorithm dfedalt --seeds 3
"""

import argparse
import sys

import numpy as np

from dfedsim.config import parse_config_text
from dfedsim.protocol import run_experiment
from dfedsim.topology import build_mixing_matrix, build_topology

from compare_algorithms import TEMPLATE

TOPOLOGIES = ("ring", "grid", "exponential", "full")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--algorithm", default="dfedalt")
    parser.add_argument("--partition", choices=("dirichlet", "pathological"), default="dirichlet")
    parser.add_argument("--m", type=int, default=16)
    parser.add_argument("--alpha", type=float, default=0.3)
    parser.add_argument("--rounds", type=int, default=50)
    parser.add_argument("--seeds", type=int, default=3)
    args = parser.parse_args()

    kv = 5 if args.partition == "pathological" else 1
    print(f"# algorithm={args.algorithm} partition={args.partition} m={args.m} seeds={args.seeds}")
    print(f"{'topology':<12s} {'gap':>7s} {'acc_mean':>9s} {'acc_std':>8s} {'consensus':>10s}")
    for topology in TOPOLOGIES:
        from dfedsim.config import _parse_topology_kind

        mix = build_mixing_matrix(build_topology(_parse_topology_kind(topology), args.m))
        accs, cons = [], []
        for seed in range(1, args.seeds + 1):
            cfg = parse_config_text(TEMPLATE.format(
                algo=args.algorithm, seed=seed, rounds=args.rounds, topology=topology,
                m=args.m, partition=args.partition, alpha=args.alpha, rho=0.05, kv=kv,
            ))
            records, _ = run_experiment(cfg)
            accs.append(records[-1].mean_personal_acc)
            cons.append(records[-1].consensus_error)
        print(f"{topology:<12s} {mix.spectral_gap:7.4f} {np.mean(accs):9.4f} "
              f"{np.std(accs):8.4f} {np.mean(cons):10.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
