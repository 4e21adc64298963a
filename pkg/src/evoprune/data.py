"""Feature datasets: binary/CSV loading, validation, and fold splitting."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"EPTL"
FORMAT_VERSION = 1

# magic (4 bytes), version u32, n u32, d u32, n_classes u32 -- all little-endian
_HEADER = struct.Struct("<4sIIII")


class DatasetError(ValueError):
    """A feature file or dataset violates the format contract."""


def _validate(features: np.ndarray, labels: np.ndarray, n_classes: int, name: str) -> None:
    if features.ndim != 2:
        raise DatasetError(f"{name}: features must be a 2-d matrix, got shape {features.shape}")
    n, d = features.shape
    if labels.shape != (n,):
        raise DatasetError(f"{name}: expected {n} labels, got shape {labels.shape}")
    if n_classes < 2:
        raise DatasetError(f"{name}: need at least 2 classes, got {n_classes}")
    if d < 1:
        raise DatasetError(f"{name}: feature dimension must be >= 1")
    bad = np.flatnonzero((labels < 0) | (labels >= n_classes))
    if bad.size:
        i = int(bad[0])
        raise DatasetError(f"{name}: label out of range at row {i}: {int(labels[i])} not in [0, {n_classes})")
    finite = np.isfinite(features)
    if not finite.all():
        i, j = (int(v) for v in np.argwhere(~finite)[0])
        raise DatasetError(f"{name}: non-finite feature value at row {i}, column {j}")


@dataclass(frozen=True)
class FeatureDataset:
    """A matrix of pre-extracted feature vectors with integer class labels.

    Features are stored as float32 (the on-disk precision); labels are class
    indices in [0, n_classes). Instances are immutable and safe to share
    between concurrent evaluation workers. Loaded datasets must cover every
    class (n >= n_classes, checked at load time); in-memory partitions such
    as individual folds may be smaller.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = "dataset"

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        _validate(features, labels, self.n_classes, self.name)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "FeatureDataset":
        return FeatureDataset(
            self.features[indices], self.labels[indices], self.n_classes, name or self.name
        )


@dataclass(frozen=True)
class SplitSpec:
    """How to derive (train, test) pairs from a dataset.

    kind "fixed-train-test" echoes a predefined split; kind "k-fold" builds
    label-stratified folds that are disjoint, exhaustive, and deterministic
    for a given seed.
    """

    kind: str = "k-fold"
    k: int = 5
    fold_index: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fixed-train-test", "k-fold"):
            raise DatasetError(f"unknown split kind {self.kind!r}")
        if self.kind == "k-fold":
            if self.k < 2:
                raise DatasetError(f"k-fold needs k >= 2, got {self.k}")
            if self.fold_index is not None and not (0 <= self.fold_index < self.k):
                raise DatasetError(f"fold_index {self.fold_index} not in [0, {self.k})")


def load_dataset(path, format: str | None = None, n_classes: int | None = None) -> FeatureDataset:
    """Load a feature dataset from a binary "EPTL" file or a CSV file.

    When ``format`` is None it is inferred from the file suffix (.csv reads
    as CSV, anything else as binary). For CSV files the class count is
    inferred as max(label) + 1 unless ``n_classes`` is given.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "binary"
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path, n_classes)
    raise DatasetError(f"unknown dataset format {format!r}")


def save_dataset(dataset: FeatureDataset, path, format: str = "binary") -> None:
    """Write a dataset back to disk. The binary format round-trips bit-exactly."""
    path = Path(path)
    if format == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION,
                                  dataset.n, dataset.feature_dim, dataset.n_classes))
            fh.write(np.ascontiguousarray(dataset.features, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(dataset.labels, dtype="<u4").tobytes())
    elif format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"f{i}" for i in range(dataset.feature_dim)] + ["label"])
            for row, label in zip(dataset.features, dataset.labels):
                writer.writerow([repr(float(v)) for v in row] + [int(label)])
    else:
        raise DatasetError(f"unknown dataset format {format!r}")


def _load_binary(path: Path) -> FeatureDataset:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DatasetError(f"{path}: truncated header at byte {len(data)} (need {_HEADER.size} bytes)")
    magic, version, n, d, n_classes = _HEADER.unpack_from(data, 0)
    if magic != FEATURE_MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r} at byte 0, expected {FEATURE_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported format version {version} at byte 4")
    feat_bytes = 4 * n * d
    expected = _HEADER.size + feat_bytes + 4 * n
    if len(data) != expected:
        raise DatasetError(
            f"{path}: size mismatch: file has {len(data)} bytes but the header at byte 8 "
            f"implies {expected} (features at byte {_HEADER.size}, labels at byte {_HEADER.size + feat_bytes})"
        )
    features = np.frombuffer(data, dtype="<f4", count=n * d, offset=_HEADER.size).reshape(n, d)
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=_HEADER.size + feat_bytes)
    if n < n_classes:
        raise DatasetError(f"{path}: need at least one sample per class ({n} < {n_classes})")
    try:
        return FeatureDataset(features, labels.astype(np.int64), int(n_classes), name=path.stem)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def _load_csv(path: Path, n_classes: int | None) -> FeatureDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DatasetError(f"{path}: missing header row")
        d = len(header) - 1
        if d < 1 or header != [f"f{i}" for i in range(d)] + ["label"]:
            raise DatasetError(f"{path}: malformed header row, expected f0,...,f{{d-1}},label")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise DatasetError(f"{path}: row {lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:d]])
                labels.append(int(row[d]))
            except ValueError:
                raise DatasetError(f"{path}: row {lineno}: unparseable numeric field") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    labels_arr = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels_arr.max()) + 1 if labels_arr.size else 0
    if len(rows) < n_classes:
        raise DatasetError(f"{path}: need at least one sample per class ({len(rows)} < {n_classes})")
    try:
        return FeatureDataset(np.asarray(rows, dtype=np.float32), labels_arr, n_classes, name=path.stem)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def _stratified_assignment(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each sample to one of k folds, stratified per class.

    Per class, samples are shuffled and dealt so every fold gets either
    floor(n_c/k) or that plus one; the extras go to the folds with the
    smallest running totals (lowest fold index on ties), which keeps the
    overall fold sizes within one of each other.
    """
    n = labels.shape[0]
    assignment = np.empty(n, dtype=np.int64)
    totals = np.zeros(k, dtype=np.int64)
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        base, extra = divmod(idx.size, k)
        counts = np.full(k, base, dtype=np.int64)
        order = np.lexsort((np.arange(k), totals))
        counts[order[:extra]] += 1
        pos = 0
        for fold in range(k):
            assignment[idx[pos:pos + counts[fold]]] = fold
            pos += counts[fold]
        totals += counts
    return assignment


def make_folds(
    dataset: FeatureDataset,
    spec: SplitSpec,
    test_dataset: FeatureDataset | None = None,
) -> list[tuple[FeatureDataset, FeatureDataset]]:
    """Materialize (train, test) pairs according to the split spec.

    Fixed splits echo the supplied pair; k-fold returns k pairs whose test
    partitions are disjoint, exhaustive, and stratified per class where
    class counts permit (classes with fewer than k samples simply land in
    fewer folds). Identical inputs yield identical folds on every platform.
    """
    if spec.kind == "fixed-train-test":
        if test_dataset is None:
            raise DatasetError("fixed-train-test split needs an explicit test dataset")
        if test_dataset.feature_dim != dataset.feature_dim:
            raise DatasetError(
                f"train/test dimension mismatch: {dataset.feature_dim} vs {test_dataset.feature_dim}"
            )
        if test_dataset.n_classes != dataset.n_classes:
            raise DatasetError(
                f"train/test class count mismatch: {dataset.n_classes} vs {test_dataset.n_classes}"
            )
        return [(dataset, test_dataset)]

    if spec.k > dataset.n:
        raise DatasetError(f"cannot split {dataset.n} samples into {spec.k} folds")
    rng = np.random.default_rng(spec.seed)
    assignment = _stratified_assignment(dataset.labels, spec.k, rng)
    folds = []
    for fold in range(spec.k):
        test_idx = np.flatnonzero(assignment == fold)
        train_idx = np.flatnonzero(assignment != fold)
        folds.append((
            dataset.subset(train_idx, f"{dataset.name}[fold{fold}:train]"),
            dataset.subset(test_idx, f"{dataset.name}[fold{fold}:test]"),
        ))
    return folds
