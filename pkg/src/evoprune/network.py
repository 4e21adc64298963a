"""Masked fully-connected head networks: training protocol and evaluation.

The head is a 1- or 2-hidden-layer perceptron (rectifier units, softmax
output) trained with plain mini-batch SGD on cross-entropy. A binary mask
with the shape of each weight matrix is applied multiplicatively after every
update, so pruned positions hold an exact 0 throughout training and
inference. Training stops when the epoch-mean loss has not strictly
decreased for `patience` consecutive epochs, and the parameters returned are
the checkpoint with the highest training-set accuracy seen.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .data import FeatureDataset
    from .encoding import EncodingKind

WEIGHT_MAGIC = b"EPTW"
WEIGHT_VERSION = 1


class TrainingError(RuntimeError):
    """Degenerate input or a non-finite loss during training."""


@dataclass(frozen=True)
class HeadArchitecture:
    """Shape of the trainable head: hidden widths, input features, classes."""

    hidden_sizes: tuple[int, ...]
    input_dim: int
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 1 <= len(self.hidden_sizes) <= 2:
            raise ValueError(f"supported heads have 1 or 2 hidden layers, got {len(self.hidden_sizes)}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden_sizes}")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")

    @property
    def layer_dims(self) -> tuple[tuple[int, int], ...]:
        """(fan_in, fan_out) of every weight matrix, output layer included."""
        dims = (self.input_dim, *self.hidden_sizes, self.n_classes)
        return tuple(zip(dims[:-1], dims[1:]))

    @property
    def n_layers(self) -> int:
        return len(self.hidden_sizes) + 1


@dataclass(frozen=True, eq=False)
class SparseMask:
    """One binary matrix per layer, applied elementwise to that layer's weights."""

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        arrays = tuple(np.ascontiguousarray(m, dtype=np.float64) for m in self.layers)
        for i, m in enumerate(arrays):
            if m.ndim != 2:
                raise ValueError(f"mask layer {i} must be 2-d, got shape {m.shape}")
            if not np.isin(m, (0.0, 1.0)).all():
                raise ValueError(f"mask layer {i} has entries outside {{0, 1}}")
        object.__setattr__(self, "layers", arrays)

    @classmethod
    def dense(cls, arch: HeadArchitecture) -> "SparseMask":
        return cls(tuple(np.ones(dims) for dims in arch.layer_dims))

    def validate_for(self, arch: HeadArchitecture) -> None:
        shapes = tuple(m.shape for m in self.layers)
        if shapes != arch.layer_dims:
            raise ValueError(f"mask shapes {shapes} do not match architecture {arch.layer_dims}")

    def __eq__(self, other):
        if not isinstance(other, SparseMask):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.layers, other.layers)
        )


@dataclass(frozen=True)
class TrainConfig:
    """SGD protocol parameters. Defaults follow the standard head recipe."""

    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 600
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        # zero learning rate is allowed so the stopping rule can be exercised
        # on a frozen model
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < self.patience:
            raise ValueError("max_epochs must be >= patience")


@dataclass(frozen=True, eq=False)
class TrainedHead:
    """Trained parameters plus the mask they were trained under.

    Every masked-out weight position holds an exact 0, and biases of units
    whose entire input column is masked are forced to 0 so dead units emit
    exactly nothing.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    mask: SparseMask
    train_accuracy: float
    epochs_run: int
    test_accuracy: float | None = None


def _dead_columns(mask: SparseMask) -> list[np.ndarray]:
    return [~m.any(axis=0) for m in mask.layers]


def _init_params(arch: HeadArchitecture, rng: np.random.Generator):
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_dims:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights, biases, X):
    """Hidden activations (rectified) and output logits."""
    hidden = []
    a = X
    for W, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ W + b, 0.0)
        hidden.append(a)
    logits = a @ weights[-1] + biases[-1]
    return hidden, logits


def predict_proba_arrays(weights, biases, X) -> np.ndarray:
    _, logits = _forward(weights, biases, X)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_gradients(weights, biases, mask: SparseMask, X, y):
    """Mean cross-entropy of a batch and the masked analytic gradients.

    Gradients of masked weight positions are zeroed, as are bias gradients
    of dead units, so an SGD step can never move a pruned parameter.
    """
    hidden, logits = _forward(weights, biases, X)
    m = logits.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    n = X.shape[0]
    loss = float(np.mean(lse[np.arange(n), 0] - logits[np.arange(n), y]))
    probs = np.exp(logits - lse)

    dead = _dead_columns(mask)
    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    activations = [X] + hidden
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = (activations[layer].T @ delta) * mask.layers[layer]
        db = delta.sum(axis=0)
        db[dead[layer]] = 0.0
        grad_b[layer] = db
        if layer > 0:
            delta = (delta @ weights[layer].T) * (hidden[layer - 1] > 0)
    return loss, grad_w, grad_b


def _epoch_batches(n, batch_size, rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _apply_mask(weights, biases, mask: SparseMask, dead) -> None:
    for layer in range(len(weights)):
        weights[layer] *= mask.layers[layer]
        biases[layer][dead[layer]] = 0.0


def _accuracy(weights, biases, X, y) -> float:
    _, logits = _forward(weights, biases, X)
    return float(np.mean(np.argmax(logits, axis=1) == y))


def train(arch: HeadArchitecture, mask: SparseMask, train: "FeatureDataset",
          cfg: TrainConfig) -> TrainedHead:
    """Train the head under the given mask with the standard protocol.

    Mini-batch SGD on softmax cross-entropy; batch order reshuffles each
    epoch from the config seed; the mask is re-applied after every update.
    Stops at max_epochs or after `patience` consecutive epochs without a
    strict decrease of the epoch-mean training loss, and returns the
    parameters of the epoch with the highest full-train-set accuracy.
    """
    mask.validate_for(arch)
    if train.feature_dim != arch.input_dim:
        raise TrainingError(f"dataset dimension {train.feature_dim} != architecture input {arch.input_dim}")
    if train.n_classes != arch.n_classes:
        raise TrainingError(f"dataset classes {train.n_classes} != architecture classes {arch.n_classes}")
    if train.n < 2:
        raise TrainingError("degenerate dataset: need at least 2 training samples")

    X = train.features.astype(np.float64)
    y = train.labels
    rng = np.random.default_rng(cfg.seed)
    weights, biases = _init_params(arch, rng)
    dead = _dead_columns(mask)
    _apply_mask(weights, biases, mask, dead)

    best_loss = np.inf
    stale = 0
    best_acc = -1.0
    best_weights = [w.copy() for w in weights]
    best_biases = [b.copy() for b in biases]
    epochs_run = 0

    for epoch in range(1, cfg.max_epochs + 1):
        total = 0.0
        for batch in _epoch_batches(train.n, cfg.batch_size, rng):
            loss, grad_w, grad_b = loss_and_gradients(weights, biases, mask, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            total += loss * batch.size
            for layer in range(len(weights)):
                weights[layer] -= cfg.learning_rate * grad_w[layer]
                biases[layer] -= cfg.learning_rate * grad_b[layer]
            _apply_mask(weights, biases, mask, dead)
        epochs_run = epoch
        epoch_loss = total / train.n

        acc = _accuracy(weights, biases, X, y)
        if acc > best_acc:
            best_acc = acc
            best_weights = [w.copy() for w in weights]
            best_biases = [b.copy() for b in biases]

        if epoch_loss < best_loss:
            best_loss = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    return TrainedHead(tuple(best_weights), tuple(best_biases), mask, best_acc, epochs_run)


def evaluate(head: TrainedHead, test: "FeatureDataset") -> float:
    """Fraction of argmax-correct predictions (ties go to the lowest class index)."""
    if test.n == 0:
        raise TrainingError("empty test set")
    if test.feature_dim != head.weights[0].shape[0]:
        raise TrainingError(f"test dimension {test.feature_dim} != head input {head.weights[0].shape[0]}")
    return _accuracy(head.weights, head.biases, test.features.astype(np.float64), test.labels)


def active_fraction(mask: SparseMask, kind: "EncodingKind") -> float:
    """Share of prunable structure the mask leaves enabled.

    Unit-level encodings count active units among the prunable units; the
    connection encoding counts active connections; feature selection counts
    input features still wired into the first layer.
    """
    scheme = kind.scheme
    if scheme == "neurons":
        return float(mask.layers[kind.layer - 1].any(axis=0).mean())
    if scheme == "neurons-both":
        cols = np.concatenate([mask.layers[0].any(axis=0), mask.layers[1].any(axis=0)])
        return float(cols.mean())
    if scheme == "connections":
        return float(mask.layers[kind.layer - 1].mean())
    if scheme == "features":
        return float(mask.layers[0].any(axis=1).mean())
    raise ValueError(f"unknown encoding scheme {scheme!r}")


def save_head(head: TrainedHead, path) -> None:
    """Dump weights and biases as an "EPTW" file (float32, row-major)."""
    with open(Path(path), "wb") as fh:
        fh.write(struct.pack("<4sII", WEIGHT_MAGIC, WEIGHT_VERSION, len(head.weights)))
        for W, b in zip(head.weights, head.biases):
            fh.write(struct.pack("<II", W.shape[0], W.shape[1]))
            fh.write(np.ascontiguousarray(W, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_head(path) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Read back an "EPTW" dump as (weights, biases) float32 arrays."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ValueError(f"{path}: truncated header")
    magic, version, n_layers = struct.unpack_from("<4sII", data, 0)
    if magic != WEIGHT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r} at byte 0")
    if version != WEIGHT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    weights, biases = [], []
    offset = 12
    for _ in range(n_layers):
        rows, cols = struct.unpack_from("<II", data, offset)
        offset += 8
        W = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += 4 * rows * cols
        b = np.frombuffer(data, dtype="<f4", count=cols, offset=offset)
        offset += 4 * cols
        weights.append(W)
        biases.append(b)
    if offset != len(data):
        raise ValueError(f"{path}: {len(data) - offset} trailing bytes at byte {offset}")
    return weights, biases
