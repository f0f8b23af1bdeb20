"""Per-round diagnostics and convergence-bound evaluators.

The two stationarity measures are population quantities, so they are
always computed with full-batch gradients on each client's train shard:
``delta_u_bar`` is the squared norm of the average shared-block gradient
evaluated at the consensus shared vector, and ``delta_v`` is the mean
squared norm of the personal-block gradients. ``consensus_error`` is the
mean squared distance of the clients' shared vectors from their average.

The bound evaluators reproduce the structural form of the convergence
rates with every big-O constant set to one; they are scaling/monotonicity
tools, not numeric predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Batch, grad, loss, with_u

__all__ = [
    "RoundRecord",
    "TheoryConstants",
    "delta_u_bar",
    "delta_v",
    "consensus_error",
    "mean_squared_norm",
    "bound_rhs_dfedalt",
    "bound_rhs_dfedsalt",
    "METRICS_HEADER",
    "format_record",
    "render_metrics_csv",
]


@dataclass(frozen=True)
class RoundRecord:
    """One row of per-round metrics, written to metrics.csv."""

    round: int
    mean_personal_acc: float
    std_personal_acc: float
    mean_train_loss: float
    delta_u_bar: float
    delta_v: float
    consensus_error: float
    eta_u_t: float
    eta_v_t: float


METRICS_HEADER = (
    "round,mean_personal_acc,std_personal_acc,mean_train_loss,"
    "delta_u_bar,delta_v,consensus_error,eta_u_t,eta_v_t"
)


def format_record(rec: RoundRecord) -> str:
    """Render one CSV row; floats at 17 significant digits round-trip."""
    fields = [
        str(rec.round),
        *(
            f"{x:.17g}"
            for x in (
                rec.mean_personal_acc,
                rec.std_personal_acc,
                rec.mean_train_loss,
                rec.delta_u_bar,
                rec.delta_v,
                rec.consensus_error,
                rec.eta_u_t,
                rec.eta_v_t,
            )
        ),
    ]
    return ",".join(fields)


def render_metrics_csv(records: Sequence[RoundRecord]) -> str:
    lines = [METRICS_HEADER, *(format_record(r) for r in records)]
    return "\n".join(lines) + "\n"


def _full_batch(shard_train) -> Batch:
    return Batch(features=shard_train.features, labels=shard_train.labels)


def delta_u_bar(clients) -> float:
    """Squared norm of the mean shared gradient at the consensus point.

    Every client's gradient is taken at (mean of all shared vectors, own
    personal vector) over its full train shard; the client sum runs in a
    fixed order so the value is deterministic.
    """
    u_bar = np.mean(np.stack([c.model.u for c in clients]), axis=0)
    total = np.zeros_like(u_bar)
    for c in clients:
        g_u, _ = grad(with_u(c.model, u_bar), _full_batch(c.shard.train))
        total += g_u
    mean_grad = total / len(clients)
    return float(mean_grad @ mean_grad)


def mean_squared_norm(vectors: Sequence[np.ndarray]) -> float:
    """Mean of squared L2 norms, summed in a fixed order."""
    total = 0.0
    for vec in vectors:
        total += float(vec @ vec)
    return total / len(vectors)


def delta_v(clients) -> float:
    """Mean squared norm of the clients' personal-block gradients."""
    grads = []
    for c in clients:
        _, g_v = grad(c.model, _full_batch(c.shard.train))
        grads.append(g_v)
    return mean_squared_norm(grads)


def consensus_error(clients) -> float:
    """Mean squared distance of shared vectors from their average."""
    u_stack = np.stack([c.model.u for c in clients])
    diffs = u_stack - u_stack.mean(axis=0)
    return float(np.mean(np.sum(diffs * diffs, axis=1)))


def mean_train_loss(clients) -> float:
    losses = [loss(c.model, _full_batch(c.shard.train)) for c in clients]
    return float(np.mean(losses))


@dataclass(frozen=True)
class TheoryConstants:
    """User-supplied smoothness/variance/diversity constants.

    ``chi`` (the relative cross-sensitivity) is always derived from the
    stored fields, never stored separately.
    """

    L_u: float = 1.0
    L_v: float = 1.0
    L_uv: float = 1.0
    L_vu: float = 1.0
    sigma_u: float = 1.0
    sigma_v: float = 1.0
    delta: float = 0.0
    F_gap: float = 1.0

    def __post_init__(self) -> None:
        for name in ("L_u", "L_v", "L_uv", "L_vu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("sigma_u", "sigma_v", "delta", "F_gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def chi(self) -> float:
        return max(self.L_uv, self.L_vu) / math.sqrt(self.L_u * self.L_v)


def _check_bound_args(lam: float, T: int) -> None:
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must be in [0, 1), got {lam}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")


def bound_rhs_dfedalt(c: TheoryConstants, lam: float, T: int) -> float:
    """Alternating-update rate bound with unit big-O constants.

    F_gap/sqrt(T) + sigma1^2/sqrt(T) + sigma2^2/(T*(1-lam)^2), where
    sigma1^2 folds the personal-gradient variance and the cross-block
    sensitivity, and sigma2^2 = (sigma_u^2 + delta^2)/L_u.
    """
    _check_bound_args(lam, T)
    sigma1_sq = (
        c.sigma_v**2 * (c.L_v + 1.0) / c.L_v**2
        + c.L_vu**2 * (c.sigma_u**2 + c.delta**2) / c.L_u**2
    )
    sigma2_sq = (c.sigma_u**2 + c.delta**2) / c.L_u
    sqrt_t = math.sqrt(T)
    return c.F_gap / sqrt_t + sigma1_sq / sqrt_t + sigma2_sq / (T * (1.0 - lam) ** 2)


def bound_rhs_dfedsalt(c: TheoryConstants, lam: float, T: int, K_u: int) -> float:
    """SAM-variant rate bound with unit big-O constants and rho = 1/sqrt(T).

    sigma^2 = 1/(K_u*T) + (sigma_u^2 + delta^2)/L_u^2 enters both
    topology-dependent terms, so more local steps shrink the bound.
    """
    _check_bound_args(lam, T)
    if K_u < 1:
        raise ValueError(f"K_u must be >= 1, got {K_u}")
    sigma_sq = 1.0 / (K_u * T) + (c.sigma_u**2 + c.delta**2) / c.L_u**2
    sqrt_t = math.sqrt(T)
    gap_sq = (1.0 - lam) ** 2
    return (
        c.F_gap / sqrt_t
        + c.sigma_v**2 * (c.L_v + 1.0) / (c.L_v**2 * sqrt_t)
        + c.L_u / T
        + sigma_sq * c.L_vu**2 / (sqrt_t * gap_sq)
        + sigma_sq * c.L_u / (T * gap_sq)
    )
