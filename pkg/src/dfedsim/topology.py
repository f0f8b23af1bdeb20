"""Communication graphs and gossip matrices for decentralized averaging.

Builds the four standard simulator topologies (ring, 2-D torus grid,
exponential, fully connected), assigns Metropolis-Hastings weights so the
resulting matrix is symmetric and doubly stochastic, and exposes the
spectral quantities that control how fast repeated mixing drives all
clients to consensus.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TopologyKind",
    "TopologyError",
    "Topology",
    "MixingMatrix",
    "GossipValidationReport",
    "build_topology",
    "custom_topology",
    "build_mixing_matrix",
    "validate_gossip_properties",
    "operator_norm_decay",
]


class TopologyKind(enum.Enum):
    RING = "ring"
    GRID = "grid"
    EXPONENTIAL = "exponential"
    FULL = "full"
    CUSTOM = "custom"


class TopologyError(ValueError):
    """Raised when a communication graph cannot be built as requested."""


@dataclass(frozen=True)
class Topology:
    """Undirected communication graph on ``m`` clients.

    ``adjacency`` is a symmetric boolean matrix with a zero diagonal;
    self-connections are implicit in the mixing weights, not the graph.
    """

    kind: TopologyKind
    m: int
    adjacency: np.ndarray

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def is_connected(self) -> bool:
        seen = np.zeros(self.m, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(self.adjacency[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())


@dataclass(frozen=True)
class MixingMatrix:
    """Gossip weight matrix over a topology, with its spectral summary.

    ``lam`` is the second-largest eigenvalue magnitude; ``spectral_gap``
    is ``1 - lam``. Larger gap means faster consensus.
    """

    topology: Topology
    w: np.ndarray
    lam: float
    spectral_gap: float

    @property
    def m(self) -> int:
        return self.topology.m

    @classmethod
    def from_matrix(cls, w: np.ndarray, topo: Topology) -> "MixingMatrix":
        """Wrap an arbitrary square matrix for validation or analysis."""
        lam = _second_largest_magnitude(w)
        return cls(topology=topo, w=w, lam=lam, spectral_gap=1.0 - lam)


def _second_largest_magnitude(w: np.ndarray) -> float:
    eigs = np.linalg.eigvalsh((w + w.T) / 2.0)
    mags = np.sort(np.abs(eigs))
    return float(mags[-2])


def build_topology(kind: TopologyKind, m: int) -> Topology:
    """Construct one of the named topologies on ``m`` clients.

    Ring connects i to (i +/- 1) mod m. Grid is a 2-D torus on a
    sqrt(m) x sqrt(m) lattice and requires a perfect-square m.
    Exponential connects i to (i + 2^j) mod m for j up to log2(m-1),
    symmetrized. Full connects every pair.
    """
    if m < 2:
        raise TopologyError(f"need at least 2 clients, got m={m}")
    adj = np.zeros((m, m), dtype=bool)
    if kind is TopologyKind.RING:
        for i in range(m):
            adj[i, (i + 1) % m] = True
            adj[(i + 1) % m, i] = True
    elif kind is TopologyKind.GRID:
        side = math.isqrt(m)
        if side * side != m:
            raise TopologyError(f"grid topology requires a perfect-square m, got m={m}")
        for r in range(side):
            for c in range(side):
                i = r * side + c
                for rr, cc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
                    j = (rr % side) * side + (cc % side)
                    if j != i:
                        adj[i, j] = True
                        adj[j, i] = True
    elif kind is TopologyKind.EXPONENTIAL:
        n_offsets = int(math.log2(m - 1)) + 1 if m > 2 else 1
        for i in range(m):
            for j in range(n_offsets):
                k = (i + 2**j) % m
                if k != i:
                    adj[i, k] = True
                    adj[k, i] = True
    elif kind is TopologyKind.FULL:
        adj[:] = True
        np.fill_diagonal(adj, False)
    else:
        raise TopologyError(
            "custom topology requires an explicit adjacency; use custom_topology()"
        )
    topo = Topology(kind=kind, m=m, adjacency=adj)
    if not topo.is_connected():
        raise TopologyError(f"{kind.value} topology on m={m} is not connected")
    return topo


def custom_topology(adjacency: np.ndarray) -> Topology:
    """Wrap a user-supplied adjacency matrix after validating it."""
    adj = np.asarray(adjacency, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise TopologyError("adjacency must be a square matrix")
    if adj.shape[0] < 2:
        raise TopologyError("need at least 2 clients")
    if np.any(np.diag(adj)):
        raise TopologyError("adjacency must not contain self-edges")
    if not np.array_equal(adj, adj.T):
        raise TopologyError("adjacency must be symmetric")
    topo = Topology(kind=TopologyKind.CUSTOM, m=adj.shape[0], adjacency=adj)
    if not topo.is_connected():
        raise TopologyError("custom topology is not connected")
    return topo


def build_mixing_matrix(topo: Topology) -> MixingMatrix:
    """Assign Metropolis-Hastings weights to a connected topology.

    Edge (i, j) gets weight 1 / (1 + max(deg_i, deg_j)); the diagonal
    absorbs the remainder so every row sums to one. The construction is
    symmetric and doubly stochastic for any connected graph, and the
    positive diagonal keeps the smallest eigenvalue above -1 even on
    bipartite graphs.
    """
    if not topo.is_connected():
        raise TopologyError("mixing matrix requires a connected topology")
    deg = topo.degrees().astype(np.float64)
    pair_deg = np.maximum.outer(deg, deg)
    w = np.where(topo.adjacency, 1.0 / (1.0 + pair_deg), 0.0)
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    lam = _second_largest_magnitude(w)
    return MixingMatrix(topology=topo, w=w, lam=lam, spectral_gap=1.0 - lam)


@dataclass(frozen=True)
class GossipValidationReport:
    """Pass/fail result per gossip-matrix property (tolerance 1e-9)."""

    graph_consistency: bool
    symmetry: bool
    row_stochastic: bool
    null_space: bool
    spectral: bool

    @property
    def all_pass(self) -> bool:
        return (
            self.graph_consistency
            and self.symmetry
            and self.row_stochastic
            and self.null_space
            and self.spectral
        )

    def failures(self) -> list[str]:
        return [name for name, ok in vars(self).items() if not ok]


def validate_gossip_properties(mix: MixingMatrix, tol: float = 1e-9) -> GossipValidationReport:
    """Check the defining gossip-matrix properties and report each one.

    Properties: weights live exactly on the graph (plus a positive
    diagonal), the matrix is symmetric and row-stochastic, the eigenvalue
    1 is simple (consensus is the only fixed direction), and all
    eigenvalues lie in (-1, 1].
    """
    w = mix.w
    adj = mix.topology.adjacency
    m = w.shape[0]
    off_diag = ~np.eye(m, dtype=bool)
    on_graph = np.all(w[adj] > 0) and np.all(np.diag(w) > 0)
    off_graph = np.all(np.abs(w[off_diag & ~adj]) <= tol)
    graph_consistency = bool(on_graph and off_graph)
    symmetry = bool(np.max(np.abs(w - w.T)) <= tol)
    row_stochastic = bool(np.max(np.abs(w.sum(axis=1) - 1.0)) <= tol)
    eigs = np.linalg.eigvalsh((w + w.T) / 2.0)
    null_space = int(np.sum(np.abs(eigs - 1.0) <= tol)) == 1
    spectral = bool(eigs[-1] <= 1.0 + tol and eigs[0] > -1.0 + tol)
    return GossipValidationReport(
        graph_consistency=graph_consistency,
        symmetry=symmetry,
        row_stochastic=row_stochastic,
        null_space=null_space,
        spectral=spectral,
    )


def operator_norm_decay(mix: MixingMatrix, t_max: int) -> np.ndarray:
    """Spectral norm of (W^t - averaging matrix) for t = 1..t_max.

    Each entry is bounded by lam^t; repeated mixing contracts any
    disagreement component at least geometrically.
    """
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    m = mix.m
    p = np.full((m, m), 1.0 / m)
    out = np.empty(t_max)
    w_pow = mix.w.copy()
    for t in range(t_max):
        out[t] = np.linalg.norm(w_pow - p, ord=2)
        if t + 1 < t_max:
            w_pow = w_pow @ mix.w
    return out
