"""Scikit-learn compatible wrappers around the trainer and the evolutionary search.

These let the masked head and the mask search compose with the wider
ecosystem (pipelines, cross-validation, cloning). The lower-level module
functions remain the canonical interface for the experiment harness.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import ga
from .data import FeatureDataset
from .encoding import EncodingKind, decode
from .network import (
    HeadArchitecture,
    SparseMask,
    TrainConfig,
    evaluate,
    predict_proba_arrays,
    train,
)


def _as_dataset(X, y, n_classes, name):
    return FeatureDataset(np.asarray(X, dtype=np.float32), y, n_classes, name)


class SparseHeadClassifier(ClassifierMixin, BaseEstimator):
    """Fully-connected head classifier trained under an optional binary mask.

    Parameters mirror the training protocol: plain SGD on cross-entropy,
    per-epoch loss patience, and best-train-accuracy checkpointing. `mask`
    is a SparseMask matching the architecture, or None for dense training.
    """

    def __init__(self, hidden_sizes=(512,), mask=None, learning_rate=0.01,
                 batch_size=32, max_epochs=600, patience=10, seed=0):
        self.hidden_sizes = hidden_sizes
        self.mask = mask
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _train_config(self, seed=None):
        return TrainConfig(self.learning_rate, self.batch_size, self.max_epochs,
                           self.patience, self.seed if seed is None else seed)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        arch = HeadArchitecture(tuple(self.hidden_sizes), self.n_features_in_, len(self.classes_))
        mask = self.mask if self.mask is not None else SparseMask.dense(arch)
        dataset = _as_dataset(X, y_idx, len(self.classes_), "fit")
        self.head_ = train(arch, mask, dataset, self._train_config())
        self.train_accuracy_ = self.head_.train_accuracy
        self.epochs_run_ = self.head_.epochs_run
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "head_")
        X = check_array(X)
        return predict_proba_arrays(self.head_.weights, self.head_.biases,
                                    X.astype(np.float64))

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class _EvolvedMaskMixin:
    """Shared GA-search plumbing for the evolved estimators."""

    def _ga_config(self):
        return ga.GAConfig(self.population_size, self.max_evals, self.nam_candidates,
                           self.p_mut, self.p_one, self.seed)

    def _search(self, X, y_idx, n_classes, kind, eval_set=None):
        arch = HeadArchitecture(tuple(self.hidden_sizes), X.shape[1], n_classes)
        kind.validate_for(arch)
        if eval_set is None:
            X_tr, X_ev, y_tr, y_ev = train_test_split(
                X, y_idx, test_size=self.validation_fraction,
                random_state=self.seed, stratify=y_idx)
        else:
            X_tr, y_tr = X, y_idx
            X_ev, y_ev = eval_set
        train_ds = _as_dataset(X_tr, y_tr, n_classes, "search-train")
        eval_ds = _as_dataset(X_ev, y_ev, n_classes, "search-eval")

        def fitness(chrom, seed):
            head = train(arch, decode(chrom, arch), train_ds,
                         TrainConfig(self.learning_rate, self.batch_size,
                                     self.max_epochs, self.patience, seed))
            return evaluate(head, eval_ds)

        best, history = ga.run(self._ga_config(), kind.length(arch), fitness, kind)
        return arch, best, history


class EvoPruneClassifier(_EvolvedMaskMixin, ClassifierMixin, BaseEstimator):
    """Classifier whose head sparsity mask is found by the genetic search.

    ``encoding`` is one of the chromosome tags: "N1" or "N2" (unit pruning of
    one hidden layer), "NB" (both layers), "C1"/"C2" (single connections), or
    "FS" (input feature selection). Fitness is accuracy on a held-out
    validation split (or an explicit ``eval_set``); after the search the head
    is retrained on all of the data under the best mask.
    """

    def __init__(self, encoding="N1", hidden_sizes=(512,), population_size=30,
                 max_evals=200, nam_candidates=3, p_mut=0.07, p_one=0.5,
                 validation_fraction=0.25, learning_rate=0.01, batch_size=32,
                 max_epochs=600, patience=10, seed=0):
        self.encoding = encoding
        self.hidden_sizes = hidden_sizes
        self.population_size = population_size
        self.max_evals = max_evals
        self.nam_candidates = nam_candidates
        self.p_mut = p_mut
        self.p_one = p_one
        self.validation_fraction = validation_fraction
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def fit(self, X, y, eval_set=None):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        kind = EncodingKind.from_tag(self.encoding)
        arch, best, history = self._search(X, y_idx, len(self.classes_), kind, eval_set)
        self.best_record_ = best
        self.history_ = history
        self.mask_ = decode(best.chromosome, arch)
        dataset = _as_dataset(X, y_idx, len(self.classes_), "refit")
        self.head_ = train(arch, self.mask_, dataset,
                           TrainConfig(self.learning_rate, self.batch_size,
                                       self.max_epochs, self.patience, self.seed))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "head_")
        X = check_array(X)
        return predict_proba_arrays(self.head_.weights, self.head_.biases,
                                    X.astype(np.float64))

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class EvoFeatureSelector(_EvolvedMaskMixin, SelectorMixin, BaseEstimator):
    """Feature selector driven by the genetic search in feature-selection mode.

    Each gene toggles one input feature of a small probe head; the selected
    support is the best chromosome found. Composes with pipelines via the
    usual transform/get_support surface.
    """

    def __init__(self, hidden_sizes=(512,), population_size=30, max_evals=200,
                 nam_candidates=3, p_mut=0.07, p_one=0.5, validation_fraction=0.25,
                 learning_rate=0.01, batch_size=32, max_epochs=600, patience=10,
                 seed=0):
        self.hidden_sizes = hidden_sizes
        self.population_size = population_size
        self.max_evals = max_evals
        self.nam_candidates = nam_candidates
        self.p_mut = p_mut
        self.p_one = p_one
        self.validation_fraction = validation_fraction
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def fit(self, X, y, eval_set=None):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        kind = EncodingKind.feature_selection()
        _, best, history = self._search(X, y_idx, len(self.classes_), kind, eval_set)
        self.best_record_ = best
        self.history_ = history
        self.support_mask_ = best.chromosome.genes.astype(bool)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_mask_")
        return self.support_mask_
