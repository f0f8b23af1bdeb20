"""Decentralized round engine: alternating partial-model training with
gossip averaging, plus full-model-gossip and no-communication baselines.

One round runs, per client: an optional personal phase (personal block
trained with the shared block frozen at its round-start value), then a
shared phase (shared block trained with the personal block frozen), then
a synchronous gossip step that averages the shared vectors over the
topology. Randomness comes from per-(client, round) streams, so parallel
and serial client execution produce bit-identical trajectories.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Callable, Iterator, Sequence

import numpy as np

from . import metrics
from .data import ClientShard, Dataset, generate_synthetic, partition_dirichlet, partition_pathological
from .model import Batch, PartialModel, accuracy, grad, init_model, with_u, with_v
from .optim import OptState, lr_at_round, momentum_step, sam_step, sgd_step
from .topology import MixingMatrix, build_mixing_matrix, build_topology

if TYPE_CHECKING:
    from .config import ExperimentConfig

__all__ = [
    "Algorithm",
    "SharedUpdate",
    "RoundConfig",
    "ClientState",
    "ExperimentError",
    "personal_phase",
    "shared_phase",
    "gossip_mix",
    "run_round",
    "run_experiment",
]


class Algorithm(enum.Enum):
    DFEDALT = "dfedalt"
    DFEDSALT = "dfedsalt"
    DFEDAVG = "dfedavg"
    DFEDAVGM = "dfedavgm"
    LOCAL = "local"


class SharedUpdate(enum.Enum):
    SGD = "sgd"
    SAM = "sam"


class ExperimentError(RuntimeError):
    """A run failed; the message names the failing stage."""


@dataclass(frozen=True)
class RoundConfig:
    """Local-iteration budget for one round."""

    K_u_epochs: int = 5
    K_v_epochs: int = 1
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.K_u_epochs < 1 or self.K_v_epochs < 1 or self.batch_size < 1:
            raise ValueError("epoch counts and batch size must be >= 1")


@dataclass(frozen=True)
class ClientState:
    """One client's shard, model, optimizer state, and RNG stream.

    The stream for round t is derived from (run_seed, client_id, t), so
    distinct (client, round) pairs are independent and scheduling order
    cannot change what any client draws.
    """

    client_id: int
    shard: ClientShard
    model: PartialModel
    opt: OptState
    run_seed: int
    rng: np.random.Generator | None = None


def round_rng(run_seed: int, client_id: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([run_seed, client_id, t]))


def _batches(rng: np.random.Generator, ds: Dataset, batch_size: int) -> Iterator[Batch]:
    perm = rng.permutation(ds.n)
    for start in range(0, ds.n, batch_size):
        idx = perm[start : start + batch_size]
        yield Batch(features=ds.features[idx], labels=ds.labels[idx])


def personal_phase(state: ClientState, eta_v: float, cfg: RoundConfig) -> np.ndarray:
    """Train the personal block; the shared block stays at its round-start
    value throughout. Returns the updated personal vector."""
    train = state.shard.train
    if train.n == 0:
        raise ExperimentError(f"client {state.client_id} has an empty train shard")
    v = state.model.v
    for _ in range(cfg.K_v_epochs):
        for batch in _batches(state.rng, train, cfg.batch_size):
            _, g_v = grad(with_v(state.model, v), batch)
            v = sgd_step(v, g_v, eta_v)
    return v


def shared_phase(
    state: ClientState,
    eta_u: float,
    option: SharedUpdate,
    rho: float,
    cfg: RoundConfig,
) -> np.ndarray:
    """Train the shared block with the personal block frozen.

    The personal vector in ``state.model`` must already be this round's
    updated value. Returns the local shared vector to be gossiped.
    """
    train = state.shard.train
    if train.n == 0:
        raise ExperimentError(f"client {state.client_id} has an empty train shard")
    u = state.model.u
    for _ in range(cfg.K_u_epochs):
        for batch in _batches(state.rng, train, cfg.batch_size):
            model = with_u(state.model, u)
            if option is SharedUpdate.SAM:
                u = sam_step(model, batch, eta_u, rho)
            else:
                g_u, _ = grad(model, batch)
                u = sgd_step(u, g_u, eta_u)
    return u


def _joint_phase(
    state: ClientState, eta: float, use_momentum: bool, cfg: RoundConfig
) -> tuple[np.ndarray, OptState]:
    """Full-model local training for the gossip-everything baselines."""
    train = state.shard.train
    if train.n == 0:
        raise ExperimentError(f"client {state.client_id} has an empty train shard")
    n_u = state.model.u.size
    w = np.concatenate([state.model.u, state.model.v])
    opt = state.opt
    for _ in range(cfg.K_u_epochs):
        for batch in _batches(state.rng, train, cfg.batch_size):
            model = replace(state.model, u=w[:n_u], v=w[n_u:])
            g_u, g_v = grad(model, batch)
            g = np.concatenate([g_u, g_v])
            if use_momentum:
                w, opt = momentum_step(w, g, eta, opt)
            else:
                w = sgd_step(w, g, eta)
    return w, opt


def gossip_mix(z: Sequence[np.ndarray], mix: MixingMatrix) -> list[np.ndarray]:
    """Synchronously average the stacked vectors with the gossip weights.

    Row i of the result is the weighted sum of all neighbors' vectors
    (self included); every client mixes against the same snapshot.
    """
    if len(z) != mix.m:
        raise ValueError(f"got {len(z)} vectors for a {mix.m}-client matrix")
    stacked = np.stack(z)
    mixed = mix.w @ stacked
    return [mixed[i] for i in range(mix.m)]


def _map_clients(
    fn: Callable[[ClientState], object],
    states: Sequence[ClientState],
    parallel: bool,
) -> list:
    if not parallel:
        return [fn(s) for s in states]
    with ThreadPoolExecutor(max_workers=min(8, len(states))) as pool:
        return list(pool.map(fn, states))


def run_round(
    clients: Sequence[ClientState],
    mix: MixingMatrix,
    algo: Algorithm,
    t: int,
    config: "ExperimentConfig",
    parallel: bool = False,
) -> tuple[list[ClientState], metrics.RoundRecord]:
    """Advance every client by one communication round.

    The stationarity measures follow their definitions: the personal one
    is taken at the round-start state, the shared one at the round-start
    consensus vector paired with the freshly updated personal blocks.
    Accuracy, loss, and consensus error are measured after mixing.
    """
    eta_u_t = lr_at_round(config.eta_u, config.decay, t)
    eta_v_t = lr_at_round(config.eta_v, config.decay, t)
    rcfg = RoundConfig(config.K_u_epochs, config.K_v_epochs, config.batch_size)
    states = [
        replace(c, rng=round_rng(c.run_seed, c.client_id, t)) for c in clients
    ]

    d_v = metrics.delta_v(states)

    if algo in (Algorithm.DFEDALT, Algorithm.DFEDSALT, Algorithm.LOCAL):
        new_vs = _map_clients(
            lambda s: personal_phase(s, eta_v_t, rcfg), states, parallel
        )
        states = [
            replace(s, model=with_v(s.model, v)) for s, v in zip(states, new_vs)
        ]
        d_u = metrics.delta_u_bar(states)
        option = SharedUpdate.SAM if algo is Algorithm.DFEDSALT else SharedUpdate.SGD
        zs = _map_clients(
            lambda s: shared_phase(s, eta_u_t, option, config.rho, rcfg),
            states,
            parallel,
        )
        new_us = zs if algo is Algorithm.LOCAL else gossip_mix(zs, mix)
        states = [
            replace(s, model=with_u(s.model, u)) for s, u in zip(states, new_us)
        ]
    elif algo in (Algorithm.DFEDAVG, Algorithm.DFEDAVGM):
        d_u = metrics.delta_u_bar(states)
        use_momentum = algo is Algorithm.DFEDAVGM
        results = _map_clients(
            lambda s: _joint_phase(s, eta_u_t, use_momentum, rcfg), states, parallel
        )
        mixed = gossip_mix([w for w, _ in results], mix)
        n_u = states[0].model.u.size
        states = [
            replace(s, model=replace(s.model, u=w[:n_u], v=w[n_u:]), opt=opt)
            for s, w, (_, opt) in zip(states, mixed, results)
        ]
    else:  # pragma: no cover - exhaustive enum
        raise ExperimentError(f"unknown algorithm {algo}")

    accs = np.array([accuracy(s.model, s.shard.test) for s in states])
    record = metrics.RoundRecord(
        round=t,
        mean_personal_acc=float(accs.mean()),
        std_personal_acc=float(accs.std()),
        mean_train_loss=metrics.mean_train_loss(states),
        delta_u_bar=d_u,
        delta_v=d_v,
        consensus_error=metrics.consensus_error(states),
        eta_u_t=eta_u_t,
        eta_v_t=eta_v_t,
    )
    states = [replace(s, rng=None) for s in states]
    return states, record


def _subseed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, np.uint64)[0])


@contextmanager
def _stage(name: str):
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(f"stage '{name}' failed: {exc}") from exc


def build_clients(config: "ExperimentConfig") -> tuple[list[ClientState], MixingMatrix]:
    """Construct topology, data, shards, and initial client states."""
    from .config import PartitionScheme

    with _stage("topology"):
        topo = build_topology(config.topology_kind, config.m)
        mix = build_mixing_matrix(topo)
    with _stage("data"):
        ds = generate_synthetic(
            num_classes=config.num_classes,
            dim=config.dim,
            n_per_class=config.n_per_class,
            class_sep=config.class_sep,
            seed=_subseed(config.seed, 0),
        )
    with _stage("partition"):
        if config.partition is PartitionScheme.DIRICHLET:
            shards = partition_dirichlet(
                ds,
                config.m,
                alpha=config.alpha,
                min_per_client=config.min_per_client,
                seed=_subseed(config.seed, 1),
            )
        else:
            shards = partition_pathological(
                ds, config.m, c_per_client=config.c_per_client, seed=_subseed(config.seed, 1)
            )
    with _stage("init"):
        if config.independent_init:
            models = [
                init_model(config.layer_dims, config.split_index, _subseed(config.seed, 2, i))
                for i in range(config.m)
            ]
        else:
            shared = init_model(config.layer_dims, config.split_index, _subseed(config.seed, 2))
            models = [shared] * config.m
    opt = OptState(
        eta_u0=config.eta_u,
        eta_v0=config.eta_v,
        momentum=config.momentum,
        decay=config.decay,
        rho=config.rho,
    )
    clients = [
        ClientState(
            client_id=i,
            shard=shards[i],
            model=models[i],
            opt=opt,
            run_seed=config.seed,
        )
        for i in range(config.m)
    ]
    return clients, mix


def run_experiment(
    config: "ExperimentConfig", parallel: bool = False
) -> tuple[list[metrics.RoundRecord], list[ClientState]]:
    """Run a full experiment: one record per round plus final states.

    Deterministic in the config; intra-round client parallelism does not
    change any output byte.
    """
    clients, mix = build_clients(config)
    algo = config.algorithm
    records: list[metrics.RoundRecord] = []
    for t in range(config.rounds):
        with _stage(f"round {t}"):
            clients, record = run_round(clients, mix, algo, t, config, parallel=parallel)
        records.append(record)
    return records, clients
