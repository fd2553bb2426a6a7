"""Synthetic long-tailed data, CSV ingestion, stratified splits and feature jitter."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleSplit, InvalidSpec, ParseError, RaggedRow, UnknownLabel

UNLABELED = -1
DEFAULT_PRIORS = (0.6, 0.2, 0.1, 0.06, 0.04)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (K, d)
    labels: np.ndarray  # (K,), UNLABELED for unknown
    n: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise InvalidSpec("features and labels disagree on sample count")
        if np.any((self.labels < UNLABELED) | (self.labels >= self.n)):
            raise InvalidSpec("label out of range")

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n)


@dataclass(frozen=True)
class DatasetSplit:
    """Partition of one dataset.

    ``unlabeled_truth`` holds the hidden labels of the unlabeled rows; the
    engine never reads it, it is there for diagnostics and the upper-bound
    configuration.
    """
    labeled: Dataset
    unlabeled: Dataset
    val: Dataset
    test: Dataset
    unlabeled_truth: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.labeled.n

    def upper_bound(self) -> "DatasetSplit":
        """All training data labeled, using the hidden truth where it is known."""
        known = self.unlabeled_truth >= 0
        features = np.concatenate([self.labeled.features, self.unlabeled.features[known]])
        labels = np.concatenate([self.labeled.labels, self.unlabeled_truth[known]])
        empty = Dataset(np.zeros((0, self.labeled.d)), np.zeros(0, dtype=np.int64), self.n)
        return DatasetSplit(Dataset(features, labels, self.n), empty, self.val, self.test,
                            np.zeros(0, dtype=np.int64))


@dataclass(frozen=True)
class SynthSpec:
    n: int = 5
    d: int = 16
    priors: tuple = DEFAULT_PRIORS
    mean_scale: float = 2.0
    sigma: float = 1.0
    count: int = 5800
    seed: int = 0

    def validate(self) -> None:
        p = np.asarray(self.priors, dtype=np.float64)
        if self.n < 2 or p.shape != (self.n,):
            raise InvalidSpec(f"need {self.n} priors, got {len(self.priors)}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidSpec("priors must be a probability vector")
        if not self.sigma > 0:
            raise InvalidSpec("sigma must be > 0")
        if self.d < 1 or self.count < self.n:
            raise InvalidSpec("need d >= 1 and at least one sample per class")


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    exact = w / w.sum() * total
    counts = np.floor(exact + 1e-9).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        # stable sort keeps ties in index order
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def gen_synthetic(spec: SynthSpec) -> Dataset:
    """Isotropic Gaussian mixture with exact class counts."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    counts = largest_remainder(spec.priors, spec.count)
    means = rng.normal(size=(spec.n, spec.d))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= spec.mean_scale
    labels = np.repeat(np.arange(spec.n), counts)
    features = means[labels] + spec.sigma * rng.normal(size=(spec.count, spec.d))
    perm = rng.permutation(spec.count)
    return Dataset(features[perm], labels[perm], spec.n)


def split(ds: Dataset, labeled_count: int, val_count: int, test_count: int,
          seed: int = 0) -> DatasetSplit:
    """Stratified split.

    ``val_count`` and ``test_count`` are per class. The labeled set follows
    the class frequencies of what remains, with at least one sample per
    class; everything else becomes unlabeled. Rows of ``ds`` that were
    already unlabeled go straight to the unlabeled set.
    """
    rng = np.random.default_rng(seed)
    pools = [rng.permutation(np.flatnonzero(ds.labels == c)) for c in range(ds.n)]
    for c, pool in enumerate(pools):
        if len(pool) < val_count + test_count + 1:
            raise InfeasibleSplit(f"class {c} has {len(pool)} samples, needs "
                                  f"{val_count + test_count + 1}")
    val_idx = np.concatenate([p[:val_count] for p in pools])
    test_idx = np.concatenate([p[val_count:val_count + test_count] for p in pools])
    rest = [p[val_count + test_count:] for p in pools]
    sizes = np.array([len(r) for r in rest])
    if labeled_count < ds.n or labeled_count > sizes.sum():
        raise InfeasibleSplit(f"labeled_count={labeled_count} outside [{ds.n}, {sizes.sum()}]")
    quota = largest_remainder(sizes, labeled_count)
    # enforce the one-per-class floor by borrowing from the largest quotas
    while np.any(quota < 1):
        donor = int(np.argmax(quota))
        quota[np.argmin(quota)] += 1
        quota[donor] -= 1
    lab_idx = np.concatenate([r[:k] for r, k in zip(rest, quota)])
    unl_idx = np.concatenate([r[k:] for r, k in zip(rest, quota)]
                             + [np.flatnonzero(ds.labels == UNLABELED)])
    unl_idx = np.sort(unl_idx)
    truth = ds.labels[unl_idx].copy()
    unlabeled = Dataset(ds.features[unl_idx], np.full(len(unl_idx), UNLABELED), ds.n)
    return DatasetSplit(ds.subset(np.sort(lab_idx)), unlabeled, ds.subset(np.sort(val_idx)),
                        ds.subset(np.sort(test_idx)), truth)


def load_csv(path, n: int | None = None) -> Dataset:
    """Read ``f0,...,f{d-1},label`` rows; ``-1`` marks an unlabeled row.

    ``n`` defaults to one more than the largest label seen.
    """
    path = Path(path)
    feats, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        if not header or header[-1].strip() != "label":
            raise ParseError("last header column must be 'label'", 1)
        d = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise RaggedRow(f"expected {d + 1} fields, got {len(row)}", lineno)
            try:
                feats.append([float(v) for v in row[:d]])
                label = int(row[d])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if label < UNLABELED or (n is not None and label >= n):
                raise UnknownLabel(f"label {label} not in [-1, {n})", lineno)
            labels.append(label)
    labels = np.asarray(labels, dtype=np.int64)
    if n is None:
        n = max(int(labels.max(initial=0)) + 1, 2)
    return Dataset(np.asarray(feats, dtype=np.float64).reshape(-1, d), labels, n)


def write_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(ds.d)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def jitter(x, sigma_aug: float, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if sigma_aug == 0:
        return x.copy()
    return x + rng.normal(0.0, sigma_aug, size=x.shape)
