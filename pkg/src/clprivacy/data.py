"""Dataset ingestion, synthesis, deterministic splitting, and bucketing.

Datasets are immutable after construction: an N x d feature matrix (binary
features stored as 0/1 reals), integer class labels, and an optional
sensitive attribute column used by attribute-inference experiments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float
    labels: np.ndarray  # (N,) int
    class_count: int
    sensitive: np.ndarray | None = None  # (N,) int
    sensitive_count: int = 0

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def validate(self) -> None:
        if self.features.ndim != 2 or self.n_samples < 1:
            raise InputError("features must be a nonempty N x d matrix")
        if np.isnan(self.features).any():
            raise InputError("features contain NaN")
        if self.labels.shape != (self.n_samples,):
            raise InputError("labels length does not match features")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise InputError("labels must lie in [0, class_count)")
        if self.sensitive is not None:
            if self.sensitive.shape != (self.n_samples,):
                raise InputError("sensitive length does not match features")
            if self.sensitive.min() < 0 or self.sensitive.max() >= self.sensitive_count:
                raise InputError("sensitive values must lie in [0, sensitive_count)")


@dataclass
class SplitPlan:
    """Named fractions that must sum to 1; the split is a seeded shuffle
    followed by a contiguous partition, so it is deterministic and exact."""

    fractions: dict[str, float]
    seed: int = 0

    def validate(self) -> None:
        if not self.fractions:
            raise ConfigError("split plan needs at least one named fraction")
        if any(f <= 0 for f in self.fractions.values()):
            raise ConfigError("split fractions must be positive")
        if abs(sum(self.fractions.values()) - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")


def load_csv(
    path: str, label_column: str, sensitive_column: str | None = None
) -> Dataset:
    """Load a headered numeric CSV; row order is preserved.

    Class and sensitive counts are inferred as max value + 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: file is empty") from None
        if label_column not in header:
            raise InputError(f"{path}: missing label column {label_column!r}")
        if sensitive_column is not None and sensitive_column not in header:
            raise InputError(f"{path}: missing sensitive column {sensitive_column!r}")
        label_idx = header.index(label_column)
        sens_idx = header.index(sensitive_column) if sensitive_column else None
        feat_idx = [
            i for i in range(len(header)) if i != label_idx and i != sens_idx
        ]
        rows, labels, sens = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InputError(f"{path}: row {row_no} has {len(row)} cells, "
                                 f"expected {len(header)}")
            try:
                rows.append([float(row[i]) for i in feat_idx])
                labels.append(int(float(row[label_idx])))
                if sens_idx is not None:
                    sens.append(int(float(row[sens_idx])))
            except ValueError as exc:
                raise InputError(f"{path}: non-numeric cell at row {row_no}: {exc}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    ds = Dataset(
        features=features,
        labels=y,
        class_count=int(y.max()) + 1,
        sensitive=np.asarray(sens, dtype=np.int64) if sens else None,
        sensitive_count=(int(max(sens)) + 1) if sens else 0,
    )
    ds.validate()
    return ds


def split(dataset: Dataset, plan: SplitPlan) -> dict[str, np.ndarray]:
    """Disjoint named index sets covering the dataset exactly.

    Remainder rows left over by the fractions go to the earliest names,
    so sizes differ from exact proportionality by at most one.
    """
    plan.validate()
    n = dataset.n_samples
    names = list(plan.fractions)
    base = [int(np.floor(plan.fractions[name] * n)) for name in names]
    remainder = n - sum(base)
    for i in range(remainder):
        base[i % len(base)] += 1
    if any(size == 0 for size in base):
        raise ConfigError(f"dataset of {n} samples leaves an empty split")
    order = np.random.default_rng(plan.seed).permutation(n)
    out: dict[str, np.ndarray] = {}
    start = 0
    for name, size in zip(names, base):
        out[name] = np.sort(order[start : start + size])
        start += size
    return out


def take(dataset: Dataset, indices: np.ndarray) -> Dataset:
    """Row subset of a dataset (copy)."""
    return Dataset(
        features=dataset.features[indices],
        labels=dataset.labels[indices],
        class_count=dataset.class_count,
        sensitive=None if dataset.sensitive is None else dataset.sensitive[indices],
        sensitive_count=dataset.sensitive_count,
    )


def synth_tabular(
    n_samples: int,
    n_features: int,
    class_count: int,
    flip_noise: float = 0.1,
    cluster_spread: float = 0.006,
    sensitive_count: int = 0,
    sensitive_block: int = 0,
    seed: int = 0,
) -> Dataset:
    """Binary tabular data built from per-class prototypes.

    All class prototypes are perturbations of one shared base pattern:
    each prototype flips base bits independently at rate cluster_spread,
    which controls how separable the classes are. The default spread puts
    a 600-feature, 100-class, 10k-sample task in the memorization regime
    (training accuracy near 1, test accuracy well below it). Every sample
    then flips its prototype's bits independently at rate flip_noise.
    With flip_noise = 0 each sample equals its class prototype exactly.

    When sensitive_count > 0 the last sensitive_block feature columns are
    generated from per-attribute prototypes instead (disjoint from the
    class signal), so the class task does not trivially encode the
    sensitive attribute.
    """
    if class_count > n_samples:
        raise ConfigError("class_count cannot exceed n_samples")
    if not (0.0 <= flip_noise <= 1.0) or not (0.0 <= cluster_spread <= 1.0):
        raise ConfigError("flip_noise and cluster_spread must be in [0, 1]")
    if sensitive_count > 0:
        if sensitive_block <= 0 or sensitive_block >= n_features:
            raise ConfigError("sensitive_block must be in (0, n_features)")
    elif sensitive_block:
        raise ConfigError("sensitive_block requires sensitive_count > 0")

    rng = np.random.default_rng(seed)
    d_class = n_features - sensitive_block
    base = rng.random(d_class) < 0.5
    masks = rng.random((class_count, d_class)) < cluster_spread
    prototypes = np.logical_xor(base[None, :], masks)

    labels = rng.integers(0, class_count, size=n_samples)
    features = prototypes[labels].astype(np.float64)
    if flip_noise > 0:
        flips = rng.random((n_samples, d_class)) < flip_noise
        features = np.abs(features - flips)

    sensitive = None
    if sensitive_count > 0:
        sens_protos = rng.random((sensitive_count, sensitive_block)) < 0.5
        sensitive = rng.integers(0, sensitive_count, size=n_samples)
        block = sens_protos[sensitive].astype(np.float64)
        if flip_noise > 0:
            flips = rng.random((n_samples, sensitive_block)) < flip_noise
            block = np.abs(block - flips)
        features = np.concatenate([features, block], axis=1)

    ds = Dataset(
        features=features,
        labels=labels.astype(np.int64),
        class_count=class_count,
        sensitive=None if sensitive is None else sensitive.astype(np.int64),
        sensitive_count=sensitive_count,
    )
    ds.validate()
    return ds


def bucketize(order_or_curriculum, n_levels: int = 10) -> np.ndarray:
    """Difficulty level in 0..n_levels-1 per sample from a curriculum order.

    Levels are contiguous rank bands; band sizes differ by at most one,
    with remainder ranks assigned to the earliest (easiest) bands. Level 0
    holds the easiest samples, n_levels-1 the most difficult.
    """
    order = getattr(order_or_curriculum, "order", order_or_curriculum)
    order = np.asarray(order)
    n = order.shape[0]
    if n_levels > n:
        raise ConfigError(f"cannot form {n_levels} levels from {n} samples")
    base, rem = divmod(n, n_levels)
    sizes = [base + 1 if i < rem else base for i in range(n_levels)]
    levels = np.empty(n, dtype=np.int64)
    start = 0
    for level, size in enumerate(sizes):
        levels[order[start : start + size]] = level
        start += size
    return levels


def top_difficult_holdout(order_or_curriculum, q: float = 0.04) -> np.ndarray:
    """Indices of the top q fraction of samples by difficulty rank."""
    order = getattr(order_or_curriculum, "order", order_or_curriculum)
    order = np.asarray(order)
    if not 0.0 < q < 1.0:
        raise ConfigError("holdout fraction must be in (0, 1)")
    count = max(1, int(round(q * order.shape[0])))
    return np.sort(order[-count:])


def write_split_manifest(splits: dict[str, np.ndarray], path: str) -> None:
    """CSV manifest with columns (split_name, sample_index)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split_name", "sample_index"])
        for name, idx in splits.items():
            for i in idx:
                writer.writerow([name, int(i)])
