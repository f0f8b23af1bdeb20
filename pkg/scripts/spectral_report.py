#!/usr/bin/env python3
"""Tabulate lambda and the spectral gap for every topology over a size grid,
plus how fast repeated mixing contracts toward the averaging matrix.

Example:
  python3 scripts/spectral_report.py --sizes 4,16,64,100 --t-max 20
"""

import argparse
import sys

from dfedsim.topology import (
    TopologyKind,
    build_mixing_matrix,
    build_topology,
    operator_norm_decay,
)

KINDS = (TopologyKind.RING, TopologyKind.GRID, TopologyKind.EXPONENTIAL, TopologyKind.FULL)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="4,16,100")
    parser.add_argument("--t-max", type=int, default=10)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print("kind,m,lambda,spectral_gap,norm_decay_at_t_max")
    for kind in KINDS:
        for m in sizes:
            try:
                mix = build_mixing_matrix(build_topology(kind, m))
            except Exception as exc:
                print(f"{kind.value},{m},skipped ({exc})", file=sys.stderr)
                continue
            decay = operator_norm_decay(mix, args.t_max)
            print(f"{kind.value},{m},{mix.lam:.6g},{mix.spectral_gap:.6g},{decay[-1]:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
