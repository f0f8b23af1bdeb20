"""Local update rules: plain SGD, heavy-ball momentum, and SAM.

SAM takes two gradient evaluations per step: one to find the ascent
direction, one at the perturbed point; the second gradient drives the
actual parameter update.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .model import Batch, PartialModel, grad, with_u

__all__ = [
    "OptState",
    "lr_at_round",
    "sgd_step",
    "momentum_step",
    "sam_perturbation",
    "sam_update",
    "sam_step",
]

GRAD_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class OptState:
    """Optimizer hyperparameters plus the momentum buffer, if any."""

    eta_u0: float
    eta_v0: float
    momentum: float = 0.0
    decay: float = 0.0
    rho: float = 0.0
    momentum_buffer: np.ndarray | None = None


def lr_at_round(eta0: float, decay: float, t: int) -> float:
    """Multiplicative schedule: eta0 * (1 - decay)^t."""
    if not 0.0 <= decay < 1.0:
        raise ValueError(f"decay must be in [0, 1), got {decay}")
    if t < 0:
        raise ValueError(f"round index must be >= 0, got {t}")
    return eta0 * (1.0 - decay) ** t


def _check_dims(params: np.ndarray, g: np.ndarray) -> None:
    if params.shape != g.shape:
        raise ValueError(f"parameter shape {params.shape} != gradient shape {g.shape}")


def sgd_step(params: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
    _check_dims(params, g)
    return params - eta * g


def momentum_step(
    params: np.ndarray, g: np.ndarray, eta: float, state: OptState
) -> tuple[np.ndarray, OptState]:
    """Heavy-ball step: buf <- momentum*buf + g; params <- params - eta*buf."""
    _check_dims(params, g)
    buf = state.momentum_buffer
    if buf is None:
        buf = np.zeros_like(params)
    _check_dims(params, buf)
    buf = state.momentum * buf + g
    return params - eta * buf, replace(state, momentum_buffer=buf)


def sam_perturbation(g: np.ndarray, rho: float) -> np.ndarray:
    """Ascent offset rho * g / ||g||, or zero for a degenerate gradient."""
    norm = float(np.linalg.norm(g))
    if norm <= GRAD_NORM_FLOOR:
        return np.zeros_like(g)
    return (rho / norm) * g


def sam_update(
    params: np.ndarray,
    grad_fn: Callable[[np.ndarray], np.ndarray],
    eta: float,
    rho: float,
) -> np.ndarray:
    """One SAM step over an arbitrary gradient oracle (two evaluations)."""
    g1 = grad_fn(params)
    eps = sam_perturbation(g1, rho)
    g2 = grad_fn(params + eps)
    return sgd_step(params, g2, eta)


def sam_step(
    model: PartialModel, batch: Batch, eta_u: float, rho: float
) -> np.ndarray:
    """SAM step on the shared block, both gradients on the same batch."""

    def grad_u(u: np.ndarray) -> np.ndarray:
        return grad(with_u(model, u), batch)[0]

    return sam_update(model.u, grad_u, eta_u, rho)
