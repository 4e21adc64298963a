"""Reference models and literature pruning baselines for head networks.

* dense references: the full-width head and a grid search over hidden widths
  at 10%..90% of the full 512 units ("best fixed" picks the grid winner);
* one-shot magnitude pruning of weights or of whole units, with a short
  fine-tuning phase;
* scheduled pruning following a polynomial sparsity ramp applied every few
  epochs during an extra training phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import FeatureDataset
from .network import (
    HeadArchitecture,
    SparseMask,
    TrainConfig,
    TrainedHead,
    TrainingError,
    _accuracy,
    _apply_mask,
    _dead_columns,
    _epoch_batches,
    loss_and_gradients,
    train,
)

GRID_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

# spawn-key prefix for the fine-tuning batch stream, distinct from ga streams
_FINE_TUNE_STREAM = 2


@dataclass(frozen=True)
class DecaySchedule:
    """Polynomial sparsity ramp from s_initial to s_final over training steps.

    Applications happen at steps k_start <= K <= k_end with K mod period == 0;
    batches_per_epoch ties step counts back to epochs.
    """

    s_initial: float
    s_final: float
    k_start: int
    k_end: int
    period: int
    alpha: float
    batches_per_epoch: int

    def __post_init__(self):
        if not 0.0 <= self.s_initial <= self.s_final < 1.0:
            raise ValueError("need 0 <= s_initial <= s_final < 1")
        if self.k_start >= self.k_end:
            raise ValueError("k_start must be < k_end")
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.batches_per_epoch < 1:
            raise ValueError("batches_per_epoch must be >= 1")

    @classmethod
    def standard(cls, n_train: int, batch_size: int, s_final: float,
                 s_initial: float = 0.1, alpha: float = 3.0,
                 extra_epochs: int = 25, apply_every_epochs: int = 5) -> "DecaySchedule":
        """The usual setup: prune every 5 epochs across a 25-epoch extra phase."""
        nb = math.ceil(n_train / batch_size)
        return cls(s_initial, s_final, 0, nb * extra_epochs, nb * apply_every_epochs,
                   alpha, nb)


def sparsity_at(sched: DecaySchedule, step: int) -> float:
    """Scheduled sparsity at a training step; boundary values are exact."""
    if not sched.k_start <= step <= sched.k_end:
        raise ValueError(f"step {step} outside [{sched.k_start}, {sched.k_end}]")
    if step == sched.k_start:
        return sched.s_initial
    if step == sched.k_end:
        return sched.s_final
    progress = (step - sched.k_start) / (sched.k_end - sched.k_start)
    return sched.s_final + (sched.s_initial - sched.s_final) * (1.0 - progress) ** sched.alpha


def _magnitude_mask_arrays(weights, target_layers: tuple[int, ...], s_final: float):
    """Per-layer 0/1 arrays zeroing the smallest-|w| fraction of the target pool.

    Ranking is over the union of the target layers' parameters; ties break
    toward the lowest flat index (stable sort over the layer-ordered pool).
    """
    layers = sorted(target_layers)
    pool = np.concatenate([np.abs(weights[l - 1]).ravel() for l in layers])
    n_prune = int(math.floor(s_final * pool.size))
    flat = np.ones(pool.size)
    flat[np.argsort(pool, kind="stable")[:n_prune]] = 0.0
    masks = [np.ones_like(w) for w in weights]
    offset = 0
    for l in layers:
        size = weights[l - 1].size
        masks[l - 1] = flat[offset:offset + size].reshape(weights[l - 1].shape)
        offset += size
    return masks


def prune_weights(head: TrainedHead, target_layers: tuple[int, ...], s_final: float) -> SparseMask:
    """One-shot magnitude pruning over the whole parameter set of the target layers."""
    if not 0.0 <= s_final < 1.0:
        raise ValueError("s_final must be in [0, 1)")
    return SparseMask(tuple(_magnitude_mask_arrays(head.weights, tuple(target_layers), s_final)))


def prune_neurons(head: TrainedHead, layer: int, s_final: float) -> SparseMask:
    """Zero whole units of a layer, lowest mean |input weight| first.

    Exactly floor(s_final * width) columns are removed; ties break toward
    the lowest unit index.
    """
    if not 0.0 <= s_final < 1.0:
        raise ValueError("s_final must be in [0, 1)")
    W = head.weights[layer - 1]
    width = W.shape[1]
    means = np.abs(W).mean(axis=0)
    n_prune = int(math.floor(s_final * width))
    masks = [np.ones_like(w) for w in head.weights]
    masks[layer - 1][:, np.argsort(means, kind="stable")[:n_prune]] = 0.0
    return SparseMask(tuple(masks))


def _fine_tune_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_FINE_TUNE_STREAM,)))


def _sgd_epochs(weights, biases, mask: SparseMask, X, y, cfg: TrainConfig,
                n_epochs: int, rng: np.random.Generator) -> None:
    """Plain masked SGD for a fixed number of epochs (no early stop, in place)."""
    dead = _dead_columns(mask)
    _apply_mask(weights, biases, mask, dead)
    for epoch in range(1, n_epochs + 1):
        for batch in _epoch_batches(X.shape[0], cfg.batch_size, rng):
            loss, grad_w, grad_b = loss_and_gradients(weights, biases, mask, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss in fine-tuning epoch {epoch}")
            for layer in range(len(weights)):
                weights[layer] -= cfg.learning_rate * grad_w[layer]
                biases[layer] -= cfg.learning_rate * grad_b[layer]
            _apply_mask(weights, biases, mask, dead)


def run_pruned_baseline(arch: HeadArchitecture, data: FeatureDataset, method: str,
                        target_layers: tuple[int, ...], s_final: float, cfg: TrainConfig,
                        fine_tune_epochs: int = 25) -> TrainedHead:
    """Train densely, prune once by magnitude, then fine-tune under the mask.

    method "weight" prunes individual weights over the union of the target
    layers; "neuron" prunes whole units of each target layer. The fine-tune
    budget defaults to the same 25 extra epochs the scheduled baseline gets.
    """
    head = train(arch, SparseMask.dense(arch), data, cfg)
    if method == "weight":
        mask = prune_weights(head, target_layers, s_final)
    elif method == "neuron":
        arrays = [np.ones_like(w) for w in head.weights]
        for layer in target_layers:
            arrays[layer - 1] *= prune_neurons(head, layer, s_final).layers[layer - 1]
        mask = SparseMask(tuple(arrays))
    else:
        raise ValueError(f"unknown pruning method {method!r}")

    weights = [w.copy() for w in head.weights]
    biases = [b.copy() for b in head.biases]
    X = data.features.astype(np.float64)
    y = data.labels
    if fine_tune_epochs > 0:
        _sgd_epochs(weights, biases, mask, X, y, cfg, fine_tune_epochs, _fine_tune_rng(cfg.seed))
    else:
        _apply_mask(weights, biases, mask, _dead_columns(mask))
    train_acc = _accuracy(weights, biases, X, y)
    return TrainedHead(tuple(weights), tuple(biases), mask,
                       train_acc, head.epochs_run + fine_tune_epochs)


def run_polynomial_decay(arch: HeadArchitecture, data: FeatureDataset, sched: DecaySchedule,
                         cfg: TrainConfig, target_layers: tuple[int, ...] = (1,)) -> TrainedHead:
    """Dense training followed by an extra phase of scheduled magnitude pruning.

    During the extra phase the mask is tightened to sparsity_at(K) at every
    step K with K mod period == 0 (including step 0, before any fine-tuning,
    and the final step, which lands exactly on s_final); pruning is
    cumulative, so positions never revive, and the steps in between fine-tune
    the surviving weights.
    """
    nb = math.ceil(data.n / cfg.batch_size)
    if sched.batches_per_epoch != nb:
        raise ValueError(
            f"schedule was built for {sched.batches_per_epoch} batches/epoch but the "
            f"dataset and batch size give {nb}"
        )
    head = train(arch, SparseMask.dense(arch), data, cfg)
    weights = [w.copy() for w in head.weights]
    biases = [b.copy() for b in head.biases]
    X = data.features.astype(np.float64)
    y = data.labels
    rng = _fine_tune_rng(cfg.seed)
    mask_arrays = [np.ones_like(w) for w in weights]
    mask = SparseMask(tuple(mask_arrays))
    dead = _dead_columns(mask)

    batches = iter(())
    for step in range(sched.k_start, sched.k_end + 1):
        if step % sched.period == 0:
            target = sparsity_at(sched, step)
            new_arrays = _magnitude_mask_arrays(weights, tuple(target_layers), target)
            for layer in range(len(mask_arrays)):
                mask_arrays[layer] *= new_arrays[layer]
            mask = SparseMask(tuple(mask_arrays))
            dead = _dead_columns(mask)
            _apply_mask(weights, biases, mask, dead)
        if step < sched.k_end:
            batch = next(batches, None)
            if batch is None:
                batches = _epoch_batches(data.n, cfg.batch_size, rng)
                batch = next(batches)
            loss, grad_w, grad_b = loss_and_gradients(weights, biases, mask, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at pruning step {step}")
            for layer in range(len(weights)):
                weights[layer] -= cfg.learning_rate * grad_w[layer]
                biases[layer] -= cfg.learning_rate * grad_b[layer]
            _apply_mask(weights, biases, mask, dead)

    final_mask = mask
    train_acc = _accuracy(weights, biases, X, y)
    extra_epochs = (sched.k_end - sched.k_start) // nb
    return TrainedHead(tuple(weights), tuple(biases), final_mask,
                       train_acc, head.epochs_run + extra_epochs)


def run_reference(arch: HeadArchitecture, data: FeatureDataset, cfg: TrainConfig,
                  neuron_fraction: float = 1.0) -> TrainedHead:
    """Train a dense head whose hidden widths are scaled by neuron_fraction.

    Fraction 1.0 is the full-width unpruned reference; the grid fractions
    0.1..0.9 feed the best-fixed search.
    """
    valid = GRID_FRACTIONS + (1.0,)
    if not any(math.isclose(neuron_fraction, f) for f in valid):
        raise ValueError(f"neuron_fraction must be one of {valid}")
    widths = tuple(max(1, round(neuron_fraction * h)) for h in arch.hidden_sizes)
    scaled = HeadArchitecture(widths, arch.input_dim, arch.n_classes)
    return train(scaled, SparseMask.dense(scaled), data, cfg)
