"""Evolutionary pruning and feature selection for transfer-learning heads.

A steady-state genetic algorithm evolves binary masks over the
fully-connected head of a frozen-backbone pipeline. Chromosomes can toggle
whole units of one or both hidden layers, single connections, or the input
features themselves; fitness is the test accuracy of the head trained under
the decoded mask. Reference models and magnitude/scheduled pruning baselines
share the same training protocol and report formats.
"""

from .baselines import (
    DecaySchedule,
    prune_neurons,
    prune_weights,
    run_polynomial_decay,
    run_pruned_baseline,
    run_reference,
    sparsity_at,
)
from .data import DatasetError, FeatureDataset, SplitSpec, load_dataset, make_folds, save_dataset
from .encoding import Chromosome, EncodingKind, active_counts, decode, hamming
from .estimators import EvoFeatureSelector, EvoPruneClassifier, SparseHeadClassifier
from .ga import FitnessRecord, GAConfig, Population, compare, run
from .harness import RunConfig, RunReport, report_table, run_experiment
from .network import (
    HeadArchitecture,
    SparseMask,
    TrainConfig,
    TrainedHead,
    TrainingError,
    active_fraction,
    evaluate,
    load_head,
    save_head,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Chromosome",
    "DatasetError",
    "DecaySchedule",
    "EncodingKind",
    "EvoFeatureSelector",
    "EvoPruneClassifier",
    "FeatureDataset",
    "FitnessRecord",
    "GAConfig",
    "HeadArchitecture",
    "Population",
    "RunConfig",
    "RunReport",
    "SparseHeadClassifier",
    "SparseMask",
    "SplitSpec",
    "TrainConfig",
    "TrainedHead",
    "TrainingError",
    "active_counts",
    "active_fraction",
    "compare",
    "decode",
    "evaluate",
    "hamming",
    "load_dataset",
    "load_head",
    "make_folds",
    "prune_neurons",
    "prune_weights",
    "report_table",
    "run",
    "run_experiment",
    "run_polynomial_decay",
    "run_pruned_baseline",
    "run_reference",
    "save_dataset",
    "save_head",
    "sparsity_at",
    "train",
]
