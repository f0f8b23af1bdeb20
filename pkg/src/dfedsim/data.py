"""Synthetic labelled data and non-IID partitioning across clients.

The data generator is a Gaussian mixture with class means on a sphere of
configurable radius, so task difficulty is tunable and every draw is
deterministic in the seed. Two partition schemes skew the class
distribution per client: a Dirichlet split (smaller alpha = more
heterogeneous) and a pathological split (each client holds exactly a
fixed number of classes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "ClientShard",
    "PartitionError",
    "generate_synthetic",
    "partition_dirichlet",
    "partition_pathological",
]


class PartitionError(ValueError):
    """Raised when a partition cannot satisfy its constraints."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer class labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
        )


@dataclass(frozen=True)
class ClientShard:
    """One client's local data, already split into train and test."""

    client_id: int
    train: Dataset
    test: Dataset


def generate_synthetic(
    num_classes: int,
    dim: int,
    n_per_class: int,
    class_sep: float,
    seed: int,
) -> Dataset:
    """Sample a Gaussian mixture with one unit-covariance blob per class.

    Class means are drawn once on a sphere of radius ``class_sep``;
    ``class_sep = 0`` collapses all classes onto the origin so labels
    carry no signal. Deterministic in ``seed``.
    """
    if num_classes < 2 or dim < 2 or n_per_class < 2:
        raise ValueError(
            f"degenerate dataset size: C={num_classes}, d={dim}, n_per_class={n_per_class}"
        )
    if class_sep < 0:
        raise ValueError(f"class_sep must be nonnegative, got {class_sep}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((num_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = class_sep * directions
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), n_per_class)
    noise = rng.standard_normal((num_classes * n_per_class, dim))
    features = means[labels] + noise
    return Dataset(features=features, labels=labels, num_classes=num_classes)


def _largest_remainder_counts(proportions: np.ndarray, total: int) -> np.ndarray:
    """Round ``proportions * total`` to integers that sum exactly to total."""
    quotas = proportions * total
    counts = np.floor(quotas).astype(np.int64)
    remainder = total - int(counts.sum())
    if remainder > 0:
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def _stratified_shard(client_id: int, ds: Dataset, indices: np.ndarray) -> ClientShard:
    """Split one client's sample indices 80/20 into train/test by class.

    Classes with a single sample go entirely to train; if the test side
    would end up empty, one sample of the most populous class is moved
    over so both sides are non-empty.
    """
    labels = ds.labels[indices]
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for c in np.unique(labels):
        idx_c = indices[labels == c]
        k = len(idx_c)
        n_test = int(np.floor(0.2 * k + 0.5))
        n_test = min(n_test, k - 1)
        train_parts.append(idx_c[: k - n_test])
        if n_test > 0:
            test_parts.append(idx_c[k - n_test :])
    if not test_parts:
        sizes = [len(p) for p in train_parts]
        donor = int(np.argmax(sizes))
        if sizes[donor] < 2:
            raise PartitionError(
                f"client {client_id} has too few samples per class for a train/test split"
            )
        test_parts.append(train_parts[donor][-1:])
        train_parts[donor] = train_parts[donor][:-1]
    train_idx = np.concatenate(train_parts)
    test_idx = np.concatenate(test_parts)
    return ClientShard(
        client_id=client_id, train=ds.subset(train_idx), test=ds.subset(test_idx)
    )


def partition_dirichlet(
    ds: Dataset,
    m: int,
    alpha: float,
    min_per_client: int = 10,
    seed: int = 0,
) -> list[ClientShard]:
    """Split a dataset across ``m`` clients by per-class Dirichlet draws.

    For every class, client proportions are drawn from Dir(alpha) and the
    class's samples are dealt out by largest-remainder rounding, so the
    union of all shards is exactly the input dataset. Draws leaving any
    client below ``min_per_client`` samples are retried up to 100 times.
    """
    if m < 2:
        raise ValueError(f"need at least 2 clients, got m={m}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if ds.n < m * min_per_client:
        raise PartitionError(
            f"dataset of {ds.n} samples cannot give {m} clients >= {min_per_client} each"
        )
    rng = np.random.default_rng(seed)
    class_indices = [np.flatnonzero(ds.labels == c) for c in range(ds.num_classes)]
    for _ in range(100):
        assigned: list[list[np.ndarray]] = [[] for _ in range(m)]
        for idx_c in class_indices:
            if len(idx_c) == 0:
                continue
            proportions = rng.dirichlet(np.full(m, alpha))
            counts = _largest_remainder_counts(proportions, len(idx_c))
            shuffled = rng.permutation(idx_c)
            offsets = np.cumsum(counts)[:-1]
            for i, part in enumerate(np.split(shuffled, offsets)):
                if len(part):
                    assigned[i].append(part)
        totals = [sum(len(p) for p in parts) for parts in assigned]
        if min(totals) >= min_per_client:
            return [
                _stratified_shard(i, ds, np.concatenate(assigned[i]))
                for i in range(m)
            ]
    raise PartitionError(
        f"no Dirichlet(alpha={alpha}) draw gave every client >= {min_per_client} "
        f"samples in 100 attempts (m={m}, n={ds.n})"
    )


def partition_pathological(
    ds: Dataset,
    m: int,
    c_per_client: int,
    seed: int = 0,
) -> list[ClientShard]:
    """Assign each client exactly ``c_per_client`` distinct classes.

    Clients take consecutive windows of a seeded class shuffle, cycled so
    every class is covered; each class's samples are split near-equally
    among the clients holding it.
    """
    C = ds.num_classes
    if not 1 <= c_per_client <= C:
        raise PartitionError(f"c_per_client must be in [1, {C}], got {c_per_client}")
    if m * c_per_client < C:
        raise PartitionError(
            f"m*c_per_client = {m * c_per_client} cannot cover all {C} classes"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(C)
    holders: list[list[int]] = [[] for _ in range(C)]
    for client in range(m):
        for r in range(c_per_client):
            holders[order[(client * c_per_client + r) % C]].append(client)
    assigned: list[list[np.ndarray]] = [[] for _ in range(m)]
    for c in range(C):
        idx_c = rng.permutation(np.flatnonzero(ds.labels == c))
        parts = np.array_split(idx_c, len(holders[c]))
        if any(len(p) == 0 for p in parts):
            raise PartitionError(
                f"class {c} has {len(idx_c)} samples for {len(holders[c])} holders; "
                "some client would receive none"
            )
        for client, part in zip(holders[c], parts):
            assigned[client].append(part)
    return [
        _stratified_shard(i, ds, np.concatenate(assigned[i])) for i in range(m)
    ]
