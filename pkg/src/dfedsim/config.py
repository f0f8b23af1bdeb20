"""Flat key-value experiment configuration.

The file format is one ``section.key = value`` assignment per line with
``#`` comment lines; unknown or duplicate keys are hard errors so typos
cannot silently fall back to defaults. ``echo_config`` renders the fully
defaulted effective configuration, and parsing that echo reproduces the
exact same ``ExperimentConfig``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable

from .metrics import TheoryConstants
from .protocol import Algorithm
from .topology import TopologyKind

__all__ = [
    "ConfigError",
    "PartitionScheme",
    "ExperimentConfig",
    "parse_config",
    "parse_config_text",
    "echo_config",
    "theory_constants",
]


class ConfigError(ValueError):
    """Any configuration problem: parse, value, or cross-field."""


class PartitionScheme(enum.Enum):
    DIRICHLET = "dirichlet"
    PATHOLOGICAL = "pathological"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one run."""

    algorithm: Algorithm
    topology_kind: TopologyKind
    m: int
    seed: int
    rounds: int = 50
    output_dir: str = "./out"
    # data
    num_classes: int = 10
    dim: int = 16
    n_per_class: int = 50
    class_sep: float = 6.0
    partition: PartitionScheme = PartitionScheme.DIRICHLET
    alpha: float = 0.3
    c_per_client: int = 2
    min_per_client: int = 10
    # model
    layer_dims: tuple[int, ...] = ()
    split_index: int = 0
    # optim
    eta_u: float = 0.1
    eta_v: float = 0.001
    momentum: float = 0.9
    decay: float = 0.005
    rho: float = 0.05
    # local iteration budget
    K_u_epochs: int = 5
    K_v_epochs: int = 1
    batch_size: int = 32
    independent_init: bool = False
    # convergence-bound constants
    L_u: float = 1.0
    L_v: float = 1.0
    L_uv: float = 1.0
    L_vu: float = 1.0
    sigma_u: float = 1.0
    sigma_v: float = 1.0
    delta: float = 0.0
    F_gap: float = 1.0


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_bool(raw: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ValueError("expected 'true' or 'false'")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(part.strip(), 10) for part in raw.split(","))


def _parse_topology_kind(raw: str) -> TopologyKind:
    aliases = {"exp": TopologyKind.EXPONENTIAL}
    if raw in aliases:
        return aliases[raw]
    try:
        return TopologyKind(raw)
    except ValueError:
        raise ValueError(
            f"expected one of ring, grid, exponential (exp), full; got '{raw}'"
        ) from None


def _parse_enum(cls):
    def parse(raw: str):
        try:
            return cls(raw)
        except ValueError:
            valid = ", ".join(e.value for e in cls)
            raise ValueError(f"expected one of {valid}; got '{raw}'") from None

    return parse


# key -> (attribute, parser). Order defines the canonical echo order.
_KEYS: dict[str, tuple[str, Callable[[str], object]]] = {
    "algorithm": ("algorithm", _parse_enum(Algorithm)),
    "seed": ("seed", _parse_int),
    "rounds": ("rounds", _parse_int),
    "output_dir": ("output_dir", str),
    "topology.kind": ("topology_kind", _parse_topology_kind),
    "topology.m": ("m", _parse_int),
    "data.C": ("num_classes", _parse_int),
    "data.d": ("dim", _parse_int),
    "data.n_per_class": ("n_per_class", _parse_int),
    "data.class_sep": ("class_sep", _parse_float),
    "data.partition": ("partition", _parse_enum(PartitionScheme)),
    "data.alpha": ("alpha", _parse_float),
    "data.c_per_client": ("c_per_client", _parse_int),
    "data.min_per_client": ("min_per_client", _parse_int),
    "model.layer_dims": ("layer_dims", _parse_int_list),
    "model.split_index": ("split_index", _parse_int),
    "optim.eta_u": ("eta_u", _parse_float),
    "optim.eta_v": ("eta_v", _parse_float),
    "optim.momentum": ("momentum", _parse_float),
    "optim.decay": ("decay", _parse_float),
    "optim.rho": ("rho", _parse_float),
    "round.K_u_epochs": ("K_u_epochs", _parse_int),
    "round.K_v_epochs": ("K_v_epochs", _parse_int),
    "round.batch_size": ("batch_size", _parse_int),
    "init.independent": ("independent_init", _parse_bool),
    "theory.L_u": ("L_u", _parse_float),
    "theory.L_v": ("L_v", _parse_float),
    "theory.L_uv": ("L_uv", _parse_float),
    "theory.L_vu": ("L_vu", _parse_float),
    "theory.sigma_u": ("sigma_u", _parse_float),
    "theory.sigma_v": ("sigma_v", _parse_float),
    "theory.delta": ("delta", _parse_float),
    "theory.F_gap": ("F_gap", _parse_float),
}

_REQUIRED = ("algorithm", "topology.kind", "topology.m", "seed")


def _read_assignments(text: str, source: str) -> dict[str, tuple[str, int]]:
    """Raw key -> (value, line number), with syntax and duplicate checks."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{stripped}'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{stripped}'")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        raw[key] = (value, lineno)
    return raw


def parse_config_text(
    text: str, source: str = "<config>", overrides: dict[str, str] | None = None
) -> ExperimentConfig:
    raw = _read_assignments(text, source)
    for key, value in (overrides or {}).items():
        raw[key] = (value, 0)
    for key in raw:
        if key not in _KEYS:
            raise ConfigError(f"{source}: unknown key '{key}'")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"{source}: missing required key '{key}'")
    values: dict[str, object] = {}
    for key, (text_value, lineno) in raw.items():
        attr, parser = _KEYS[key]
        try:
            values[attr] = parser(text_value)
        except ValueError as exc:
            raise ConfigError(
                f"{source}:{lineno}: invalid value for '{key}': {exc}"
            ) from None
    if "layer_dims" not in values:
        dim = values.get("dim", 16)
        num_classes = values.get("num_classes", 10)
        values["layer_dims"] = (dim, 32, num_classes)
    if "split_index" not in values:
        values["split_index"] = len(values["layer_dims"]) - 2
    cfg = ExperimentConfig(**values)
    _validate(cfg, source)
    return cfg


def parse_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"), source=str(p), overrides=overrides)


def _validate(cfg: ExperimentConfig, source: str) -> None:
    def fail(message: str) -> None:
        raise ConfigError(f"{source}: {message}")

    if cfg.m < 2:
        fail(f"topology.m must be >= 2, got {cfg.m}")
    if cfg.topology_kind is TopologyKind.GRID:
        side = math.isqrt(cfg.m)
        if side * side != cfg.m:
            fail(f"topology.m must be a perfect square for grid topology, got {cfg.m}")
    if cfg.topology_kind is TopologyKind.CUSTOM:
        fail("topology.kind 'custom' is not available from a config file")
    if cfg.seed < 0:
        fail(f"seed must be >= 0, got {cfg.seed}")
    if cfg.rounds < 0:
        fail(f"rounds must be >= 0, got {cfg.rounds}")
    if cfg.num_classes < 2:
        fail(f"data.C must be >= 2, got {cfg.num_classes}")
    if cfg.dim < 2:
        fail(f"data.d must be >= 2, got {cfg.dim}")
    if cfg.n_per_class < 2:
        fail(f"data.n_per_class must be >= 2, got {cfg.n_per_class}")
    if cfg.class_sep < 0:
        fail(f"data.class_sep must be >= 0, got {cfg.class_sep}")
    if cfg.min_per_client < 1:
        fail(f"data.min_per_client must be >= 1, got {cfg.min_per_client}")
    if cfg.partition is PartitionScheme.DIRICHLET:
        if cfg.alpha <= 0:
            fail(f"data.alpha must be > 0 for the dirichlet partition, got {cfg.alpha}")
        if cfg.num_classes * cfg.n_per_class < cfg.m * cfg.min_per_client:
            fail(
                f"dataset of {cfg.num_classes * cfg.n_per_class} samples cannot give "
                f"{cfg.m} clients >= {cfg.min_per_client} each"
            )
    else:
        if not 1 <= cfg.c_per_client <= cfg.num_classes:
            fail(
                f"data.c_per_client must be in [1, {cfg.num_classes}], got {cfg.c_per_client}"
            )
        if cfg.m * cfg.c_per_client < cfg.num_classes:
            fail(
                f"m*c_per_client = {cfg.m * cfg.c_per_client} cannot cover all "
                f"{cfg.num_classes} classes"
            )
    if len(cfg.layer_dims) < 3:
        fail(f"model.layer_dims needs at least one hidden layer, got {list(cfg.layer_dims)}")
    if any(d < 1 for d in cfg.layer_dims):
        fail(f"model.layer_dims must be positive, got {list(cfg.layer_dims)}")
    if cfg.layer_dims[0] != cfg.dim:
        fail(
            f"model.layer_dims[0] = {cfg.layer_dims[0]} must equal data.d = {cfg.dim}"
        )
    if cfg.layer_dims[-1] != cfg.num_classes:
        fail(
            f"model.layer_dims[-1] = {cfg.layer_dims[-1]} must equal data.C = {cfg.num_classes}"
        )
    n_layers = len(cfg.layer_dims) - 1
    if not 1 <= cfg.split_index <= n_layers - 1:
        fail(
            f"model.split_index must be in [1, {n_layers - 1}] for "
            f"{n_layers} layers, got {cfg.split_index}"
        )
    if cfg.eta_u < 0 or cfg.eta_v < 0:
        fail("learning rates must be >= 0")
    if not 0.0 <= cfg.momentum < 1.0:
        fail(f"optim.momentum must be in [0, 1), got {cfg.momentum}")
    if not 0.0 <= cfg.decay < 1.0:
        fail(f"optim.decay must be in [0, 1), got {cfg.decay}")
    if cfg.rho < 0:
        fail(f"optim.rho must be >= 0, got {cfg.rho}")
    if cfg.K_u_epochs < 1 or cfg.K_v_epochs < 1:
        fail("round.K_u_epochs and round.K_v_epochs must be >= 1")
    if cfg.batch_size < 1:
        fail(f"round.batch_size must be >= 1, got {cfg.batch_size}")
    for name in ("L_u", "L_v", "L_uv", "L_vu"):
        if getattr(cfg, name) <= 0:
            fail(f"theory.{name} must be > 0")
    for name in ("sigma_u", "sigma_v", "delta", "F_gap"):
        if getattr(cfg, name) < 0:
            fail(f"theory.{name} must be >= 0")


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(cfg: ExperimentConfig) -> str:
    """Render the fully defaulted configuration; parsing it round-trips."""
    attr_to_key = {attr: key for key, (attr, _) in _KEYS.items()}
    lines = ["# effective configuration (all defaults resolved)"]
    for f in fields(cfg):
        lines.append(f"{attr_to_key[f.name]} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def theory_constants(cfg: ExperimentConfig) -> TheoryConstants:
    return TheoryConstants(
        L_u=cfg.L_u,
        L_v=cfg.L_v,
        L_uv=cfg.L_uv,
        L_vu=cfg.L_vu,
        sigma_u=cfg.sigma_u,
        sigma_v=cfg.sigma_v,
        delta=cfg.delta,
        F_gap=cfg.F_gap,
    )
