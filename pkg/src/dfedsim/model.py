"""Tanh multilayer perceptron with hand-derived gradients.

Parameters are kept as two flat float64 vectors: a shared block (layers
below the split index) and a personal block (layers at or above it).
Hidden layers use tanh so the loss surface is smooth; the output layer is
linear and feeds a softmax cross-entropy loss. Everything is float64 and
deterministic so gradient checks and bitwise-reproducibility tests have
headroom.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset

__all__ = [
    "PartialModel",
    "Batch",
    "init_model",
    "loss",
    "grad",
    "accuracy",
    "layer_parameters",
    "assemble",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class Batch:
    """A minibatch of features and integer labels."""

    features: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class PartialModel:
    """MLP parameters split into a shared and a personal flat block.

    ``layer_dims`` lists input, hidden, and output widths; weight layer l
    maps layer_dims[l] to layer_dims[l+1]. Layers with index below
    ``split_index`` belong to the shared block ``u``; the rest form the
    personal block ``v``. Within a block each layer contributes its
    weight matrix (row-major) followed by its bias vector.
    """

    layer_dims: tuple[int, ...]
    split_index: int
    u: np.ndarray
    v: np.ndarray

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]


def _validate_dims(layer_dims: tuple[int, ...], split_index: int) -> None:
    if len(layer_dims) < 3:
        raise ValueError(
            f"need at least one hidden layer, got layer_dims={list(layer_dims)}"
        )
    if any(d < 1 for d in layer_dims):
        raise ValueError(f"layer widths must be positive, got {list(layer_dims)}")
    n_layers = len(layer_dims) - 1
    if not 1 <= split_index <= n_layers - 1:
        raise ValueError(
            f"split_index must be in [1, {n_layers - 1}], got {split_index}"
        )


def _layer_sizes(layer_dims: tuple[int, ...]) -> list[int]:
    return [
        layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1]
        for l in range(len(layer_dims) - 1)
    ]


def block_sizes(layer_dims: tuple[int, ...], split_index: int) -> tuple[int, int]:
    """Total parameter counts of the shared and personal blocks."""
    sizes = _layer_sizes(layer_dims)
    return sum(sizes[:split_index]), sum(sizes[split_index:])


def layer_parameters(model: PartialModel) -> list[tuple[np.ndarray, np.ndarray]]:
    """Unflatten the two blocks into per-layer (weights, bias) views."""
    dims = model.layer_dims
    out = []
    for block, start, stop in (
        (model.u, 0, model.split_index),
        (model.v, model.split_index, model.num_layers),
    ):
        pos = 0
        for l in range(start, stop):
            fan_in, fan_out = dims[l], dims[l + 1]
            w = block[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = block[pos : pos + fan_out]
            pos += fan_out
            out.append((w, b))
    return out


def assemble(
    layer_dims: tuple[int, ...],
    split_index: int,
    layers: list[tuple[np.ndarray, np.ndarray]],
) -> PartialModel:
    """Flatten per-layer (weights, bias) pairs back into a model."""
    _validate_dims(layer_dims, split_index)
    flat = [np.concatenate([w.ravel(), b]) for w, b in layers]
    u = np.concatenate(flat[:split_index])
    v = np.concatenate(flat[split_index:])
    return PartialModel(layer_dims=tuple(layer_dims), split_index=split_index, u=u, v=v)


def init_model(
    layer_dims: tuple[int, ...] | list[int], split_index: int, seed: int
) -> PartialModel:
    """Glorot-uniform weights, zero biases, deterministic in the seed."""
    dims = tuple(int(d) for d in layer_dims)
    _validate_dims(dims, split_index)
    rng = np.random.default_rng(seed)
    layers = []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return assemble(dims, split_index, layers)


def _check_batch(model: PartialModel, features: np.ndarray, labels: np.ndarray) -> None:
    if features.ndim != 2 or features.shape[1] != model.layer_dims[0]:
        raise ValueError(
            f"feature dimension {features.shape} does not match input width "
            f"{model.layer_dims[0]}"
        )
    if labels.shape[0] != features.shape[0]:
        raise ValueError("features and labels disagree on batch size")
    if labels.size and (labels.min() < 0 or labels.max() >= model.num_classes):
        raise ValueError(f"labels out of range [0, {model.num_classes})")


def _forward(model: PartialModel, features: np.ndarray) -> list[np.ndarray]:
    """Activations per layer; last entry holds the raw logits."""
    layers = layer_parameters(model)
    acts = [features]
    a = features
    for l, (w, b) in enumerate(layers):
        z = a @ w + b
        a = z if l == len(layers) - 1 else np.tanh(z)
        acts.append(a)
    return acts


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(model: PartialModel, batch: Batch) -> float:
    """Mean softmax cross-entropy over the batch.

    Per-sample losses are summed in sorted-value order, so the result is
    exactly invariant under any permutation of the batch rows.
    """
    _check_batch(model, batch.features, batch.labels)
    logits = _forward(model, batch.features)[-1]
    log_probs = _log_softmax(logits)
    per_sample = -log_probs[np.arange(len(batch.labels)), batch.labels]
    return float(np.sort(per_sample).sum() / len(per_sample))


def grad(model: PartialModel, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagation gradients of the mean loss for both blocks.

    Returns (g_u, g_v) flattened in the same layout as the parameter
    vectors; one backward pass computes both, callers use either block.
    """
    _check_batch(model, batch.features, batch.labels)
    layers = layer_parameters(model)
    acts = _forward(model, batch.features)
    logits = acts[-1]
    b = batch.features.shape[0]
    probs = np.exp(_log_softmax(logits))
    dz = probs
    dz[np.arange(b), batch.labels] -= 1.0
    dz /= b
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for l in range(len(layers) - 1, -1, -1):
        w, _ = layers[l]
        grads[l] = (acts[l].T @ dz, dz.sum(axis=0))
        if l > 0:
            dz = (dz @ w.T) * (1.0 - acts[l] ** 2)
    flat = [np.concatenate([gw.ravel(), gb]) for gw, gb in grads]
    s = model.split_index
    return np.concatenate(flat[:s]), np.concatenate(flat[s:])


def accuracy(model: PartialModel, ds: Dataset) -> float:
    """Fraction of samples whose argmax logit matches the label.

    Ties go to the lowest class index.
    """
    _check_batch(model, ds.features, ds.labels)
    logits = _forward(model, ds.features)[-1]
    return float(np.mean(np.argmax(logits, axis=1) == ds.labels))


def with_u(model: PartialModel, u: np.ndarray) -> PartialModel:
    if u.shape != model.u.shape:
        raise ValueError(f"shared block shape {u.shape} != {model.u.shape}")
    return replace(model, u=u)


def with_v(model: PartialModel, v: np.ndarray) -> PartialModel:
    if v.shape != model.v.shape:
        raise ValueError(f"personal block shape {v.shape} != {model.v.shape}")
    return replace(model, v=v)


def save_model(model: PartialModel, path) -> None:
    """Write a checkpoint: little-endian int64 header, then u, then v.

    Header layout: number of layer widths, the widths, the split index.
    """
    header = np.array(
        [len(model.layer_dims), *model.layer_dims, model.split_index], dtype="<i8"
    )
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(model.u.astype("<f8").tobytes())
        fh.write(model.v.astype("<f8").tobytes())


def load_model(path) -> PartialModel:
    """Read a checkpoint written by :func:`save_model`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    n_dims = int(np.frombuffer(raw, dtype="<i8", count=1)[0])
    header = np.frombuffer(raw, dtype="<i8", count=n_dims + 2)
    dims = tuple(int(d) for d in header[1 : n_dims + 1])
    split_index = int(header[n_dims + 1])
    _validate_dims(dims, split_index)
    n_u, n_v = block_sizes(dims, split_index)
    body = np.frombuffer(raw, dtype="<f8", offset=8 * (n_dims + 2))
    if body.size != n_u + n_v:
        raise ValueError(
            f"checkpoint has {body.size} parameters, expected {n_u + n_v}"
        )
    return PartialModel(
        layer_dims=dims, split_index=split_index, u=body[:n_u].copy(), v=body[n_u:].copy()
    )
