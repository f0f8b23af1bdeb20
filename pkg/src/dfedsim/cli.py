"""Command-line entry point: run experiments and emit report artifacts.

Subcommands: ``run`` executes one experiment and writes metrics.csv, the
effective config echo, and final per-client checkpoints; ``sweep``
repeats that over a grid of values for one config key;
``topology-report``, ``partition-report``, and ``bound-eval`` emit CSV
reports without training. Exit codes: 0 success, 1 configuration error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, echo_config, parse_config, theory_constants
from .metrics import bound_rhs_dfedalt, bound_rhs_dfedsalt, render_metrics_csv
from .model import save_model
from .protocol import ExperimentError, build_clients, run_experiment
from .topology import TopologyError, build_mixing_matrix, build_topology

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfedsim",
        description="Deterministic simulator of decentralized personalized federated learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a config file")
    run_p.add_argument("config", help="path to the config file")
    run_p.add_argument("--output-dir", help="override the config's output_dir")
    run_p.add_argument("--force", action="store_true", help="overwrite existing metrics.csv")
    run_p.add_argument(
        "--parallel", action="store_true", help="run client phases on a thread pool"
    )

    topo_p = sub.add_parser("topology-report", help="spectral report for one topology")
    topo_p.add_argument("kind", help="ring | grid | exponential | full")
    topo_p.add_argument("m", type=int, help="client count")

    part_p = sub.add_parser("partition-report", help="per-client class histogram")
    part_p.add_argument("config", help="path to the config file")

    bound_p = sub.add_parser("bound-eval", help="evaluate the convergence-bound expressions")
    bound_p.add_argument("config", help="path to the config file")

    sweep_p = sub.add_parser("sweep", help="run a grid over one config key")
    sweep_p.add_argument("config", help="path to the config file")
    sweep_p.add_argument("--param", required=True, help="config key to vary, e.g. optim.rho")
    sweep_p.add_argument(
        "--values", required=True, help="comma-separated values for the key"
    )
    sweep_p.add_argument("--output-dir", help="base directory for the grid subdirectories")
    sweep_p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sweep_p.add_argument("--parallel", action="store_true", help="parallel client phases")
    return parser


def _execute_run(cfg: ExperimentConfig, out_dir: Path, force: bool, parallel: bool) -> None:
    metrics_path = out_dir / "metrics.csv"
    if metrics_path.exists() and not force:
        raise ConfigError(
            f"{metrics_path} already exists; pass --force to overwrite"
        )
    records, clients = run_experiment(cfg, parallel=parallel)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo").write_text(echo_config(cfg), encoding="utf-8")
    metrics_path.write_text(render_metrics_csv(records), encoding="utf-8")
    for client in clients:
        save_model(client.model, out_dir / f"client_{client.client_id:04d}.model")
    print(f"wrote {len(records)} rounds to {metrics_path}")


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    _execute_run(cfg, Path(cfg.output_dir), args.force, args.parallel)
    return 0


def _cmd_topology_report(args) -> int:
    from .config import _parse_topology_kind

    try:
        kind = _parse_topology_kind(args.kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        mix = build_mixing_matrix(build_topology(kind, args.m))
    except TopologyError as exc:
        raise ConfigError(str(exc)) from None
    print("kind,m,lambda,spectral_gap")
    print(f"{kind.value},{args.m},{mix.lam:.17g},{mix.spectral_gap:.17g}")
    return 0


def _cmd_partition_report(args) -> int:
    cfg = parse_config(args.config)
    clients, _ = build_clients(cfg)
    shards = [client.shard for client in clients]
    print("client_id,class,train_count,test_count")
    for shard in shards:
        train_counts = np.bincount(shard.train.labels, minlength=cfg.num_classes)
        test_counts = np.bincount(shard.test.labels, minlength=cfg.num_classes)
        for c in range(cfg.num_classes):
            print(f"{shard.client_id},{c},{train_counts[c]},{test_counts[c]}")
    return 0


def _cmd_bound_eval(args) -> int:
    cfg = parse_config(args.config)
    if cfg.rounds < 1:
        raise ConfigError("bound-eval requires rounds >= 1")
    mix = build_mixing_matrix(build_topology(cfg.topology_kind, cfg.m))
    constants = theory_constants(cfg)
    alt = bound_rhs_dfedalt(constants, mix.lam, cfg.rounds)
    salt = bound_rhs_dfedsalt(constants, mix.lam, cfg.rounds, cfg.K_u_epochs)
    print("bound,lambda,T,K_u,value")
    print(f"dfedalt,{mix.lam:.17g},{cfg.rounds},{cfg.K_u_epochs},{alt:.17g}")
    print(f"dfedsalt,{mix.lam:.17g},{cfg.rounds},{cfg.K_u_epochs},{salt:.17g}")
    return 0


def _cmd_sweep(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one value")
    base_cfg = parse_config(args.config)
    base_dir = Path(args.output_dir or base_cfg.output_dir)
    for value in values:
        cfg = parse_config(args.config, overrides={args.param: value})
        sub_dir = base_dir / f"{args.param}={value}"
        cfg = replace(cfg, output_dir=str(sub_dir))
        _execute_run(cfg, sub_dir, args.force, args.parallel)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "topology-report": _cmd_topology_report,
    "partition-report": _cmd_partition_report,
    "bound-eval": _cmd_bound_eval,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ExperimentError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
