"""Deterministic desk-scale simulator of decentralized personalized
federated learning with partial-model personalization."""

from .config import ConfigError, ExperimentConfig, PartitionScheme, parse_config
from .data import ClientShard, Dataset, generate_synthetic, partition_dirichlet, partition_pathological
from .metrics import RoundRecord, TheoryConstants, bound_rhs_dfedalt, bound_rhs_dfedsalt
from .model import Batch, PartialModel, accuracy, grad, init_model, loss
from .optim import OptState, lr_at_round, momentum_step, sam_perturbation, sam_step, sgd_step
from .protocol import Algorithm, ClientState, gossip_mix, run_experiment, run_round
from .topology import (
    MixingMatrix,
    Topology,
    TopologyKind,
    build_mixing_matrix,
    build_topology,
    operator_norm_decay,
    validate_gossip_properties,
)

__version__ = "0.1.0"
