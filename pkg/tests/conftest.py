import numpy as np
import pytest

from evoprune import FeatureDataset, HeadArchitecture, SparseMask


def make_separable(n=64, d=4, seed=0, spread=6.0):
    """Two well-separated gaussian blobs; linearly separable by construction."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.concatenate([
        rng.normal(-spread, 1.0, size=(half, d)),
        rng.normal(spread, 1.0, size=(n - half, d)),
    ])
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    perm = rng.permutation(n)
    return FeatureDataset(X[perm].astype(np.float32), y[perm], 2, "separable")


@pytest.fixture
def separable_train():
    return make_separable(seed=0)


@pytest.fixture
def separable_test():
    return make_separable(seed=1)


@pytest.fixture
def toy_arch():
    return HeadArchitecture((4,), input_dim=4, n_classes=2)


@pytest.fixture
def two_layer_arch():
    return HeadArchitecture((4, 3), input_dim=5, n_classes=2)


def dense_mask(arch):
    return SparseMask.dense(arch)
