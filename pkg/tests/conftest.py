import numpy as np
import pytest

from dfedsim.config import ExperimentConfig, parse_config_text

BASE_CONFIG = """
algorithm = dfedalt
seed = 7
rounds = 3
topology.kind = ring
topology.m = 4
data.C = 4
data.d = 4
data.n_per_class = 30
data.class_sep = 4.0
data.partition = dirichlet
data.alpha = 1.0
model.layer_dims = 4,6,4
model.split_index = 1
optim.eta_u = 0.1
optim.eta_v = 0.05
optim.decay = 0.0
round.K_u_epochs = 1
round.K_v_epochs = 1
round.batch_size = 16
"""


def make_config(**overrides) -> ExperimentConfig:
    """Small, fast experiment config with keyword overrides."""
    text = {}
    for line in BASE_CONFIG.strip().splitlines():
        key, _, value = line.partition("=")
        text[key.strip()] = value.strip()
    text.update({k: str(v) for k, v in overrides.items()})
    return parse_config_text("\n".join(f"{k} = {v}" for k, v in text.items()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
