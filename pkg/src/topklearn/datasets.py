"""Dataset loading, synthesis, and splitting.

Features are stored densely as a d x n matrix with one column per
example; labels are 1-based integers. Datasets are frozen after
construction (the arrays are marked read-only) and safe to share.

All randomness flows through numpy's Philox generator, a counter-based
64-bit PRNG whose streams are identical across platforms, so a seed
fully determines every sample and split.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "CircleSpec",
    "load_libsvm",
    "save_libsvm",
    "generate_circle",
    "circle_bayes_topk_error",
    "split",
    "CIRCLE_SEGMENT_LENGTHS",
    "CIRCLE_SEGMENT_WEIGHTS",
]


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled multiclass dataset."""

    features: np.ndarray  # d x n
    labels: np.ndarray    # n, values in 1..num_classes
    num_classes: int

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=float))
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ValueError("features must be a d x n matrix")
        if labels.ndim != 1 or labels.size != feats.shape[1]:
            raise ValueError("labels must have one entry per feature column")
        if labels.size == 0:
            raise ValueError("no examples")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if labels.min() < 1 or labels.max() > self.num_classes:
            raise ValueError("labels must lie in 1..num_classes")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        feats.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.labels.size

    @property
    def d(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.num_classes

    def subset(self, idx):
        return Dataset(self.features[:, idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class CircleSpec:
    n_train: int = 200
    n_val: int = 200
    n_test: int = 200000
    seed: int = 0

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("all sample counts must be positive")


def load_libsvm(path, num_features=None):
    """Parse a LibSVM-format text file into a dense Dataset.

    Each line is `<label> <index>:<value> ...` with 1-based, strictly
    increasing indices. The class count is the largest label seen and
    the dimension the largest index, unless num_features overrides it.
    """
    rows = []
    max_index = 0
    max_label = 0
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                label = int(tokens[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed label {tokens[0]!r}")
            if label < 1:
                raise ValueError(f"{path}:{lineno}: labels must be >= 1, got {label}")
            pairs = []
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_str, val_str = tok.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed feature {tok!r}")
                if idx <= prev:
                    raise ValueError(
                        f"{path}:{lineno}: indices must be 1-based strictly increasing")
                prev = idx
                pairs.append((idx, val))
            max_index = max(max_index, prev)
            max_label = max(max_label, label)
            rows.append((label, pairs))
    if not rows:
        raise ValueError(f"{path}: no examples")
    d = num_features if num_features is not None else max_index
    if d < max_index:
        raise ValueError(f"num_features={d} smaller than max index {max_index}")
    n = len(rows)
    feats = np.zeros((d, n))
    labels = np.empty(n, dtype=np.int64)
    for j, (label, pairs) in enumerate(rows):
        labels[j] = label
        for idx, val in pairs:
            feats[idx - 1, j] = val
    return Dataset(feats, labels, max(max_label, 2))


def save_libsvm(data, path):
    """Write a Dataset in LibSVM text format.

    Values are printed with 17 significant digits, so a load of the
    written file reproduces the doubles exactly. Zero entries are
    omitted, as is conventional for the format.
    """
    with open(path, "w") as fh:
        for j in range(data.n):
            col = data.features[:, j]
            nz = np.nonzero(col)[0]
            parts = [str(int(data.labels[j]))]
            parts.extend(f"{i + 1}:{col[i]:.17g}" for i in nz)
            fh.write(" ".join(parts) + "\n")


# Three-class distribution on the unit circle: positions are uniform on
# [0, 7), carved into five segments of lengths 1,1,1,3,1; the label is
# drawn from the segment's class weights.
CIRCLE_SEGMENT_LENGTHS = np.array([1.0, 1.0, 1.0, 3.0, 1.0])
CIRCLE_SEGMENT_WEIGHTS = np.array([
    [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.4, 0.1, 0.5],
    [0.3, 0.7, 0.0],
    [0.0, 0.0, 1.0],
])
_CIRCLE_BOUNDS = np.cumsum(CIRCLE_SEGMENT_LENGTHS)  # 1, 2, 3, 6, 7


def _sample_circle(rng, count):
    u = rng.uniform(0.0, 7.0, size=count)
    seg = np.searchsorted(_CIRCLE_BOUNDS[:-1], u, side="right")
    v = rng.uniform(0.0, 1.0, size=count)
    cumw = np.cumsum(CIRCLE_SEGMENT_WEIGHTS, axis=1)
    labels = 1 + (v[:, None] > cumw[seg]).sum(axis=1)
    theta = 2.0 * math.pi * (u / 7.0)
    feats = np.vstack((np.cos(theta), np.sin(theta)))
    return Dataset(feats, labels, 3)


def generate_circle(spec):
    """Sample (train, val, test) datasets of the three-class circle
    distribution. A fixed seed reproduces the datasets bit for bit."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    train = _sample_circle(rng, spec.n_train)
    val = _sample_circle(rng, spec.n_val)
    test = _sample_circle(rng, spec.n_test)
    return train, val, test


def circle_bayes_topk_error(k):
    """Exact Bayes top-k error of the circle distribution: the segment
    lengths weight each segment's irreducible error."""
    from .losses import bayes_topk_error

    total = 0.0
    for length, weights in zip(CIRCLE_SEGMENT_LENGTHS, CIRCLE_SEGMENT_WEIGHTS):
        total += length * bayes_topk_error(weights, k)
    return total / CIRCLE_SEGMENT_LENGTHS.sum()


def split(data, spec):
    """Partition a dataset into (train, rest), disjoint and exhaustive.

    Stratified mode shuffles within each class and preserves class
    proportions up to rounding; it refuses splits that would leave a
    class without training examples.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    if not spec.stratified:
        perm = rng.permutation(data.n)
        n_train = int(round(spec.train_fraction * data.n))
        n_train = min(max(n_train, 1), data.n - 1)
        return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))

    # largest-remainder allocation: hit the global train count while
    # keeping every class proportional up to rounding
    classes = [np.nonzero(data.labels == cls)[0]
               for cls in range(1, data.num_classes + 1)]
    classes = [c for c in classes if c.size]
    target = int(round(spec.train_fraction * data.n))
    target = min(max(target, 1), data.n - 1)
    ideal = np.array([spec.train_fraction * c.size for c in classes])
    take = np.floor(ideal).astype(int)
    remainder = ideal - take
    short = target - int(take.sum())
    for idx in np.lexsort((np.arange(len(classes)), -remainder))[:max(short, 0)]:
        take[idx] += 1
    take = np.minimum(take, [c.size for c in classes])
    starving = [i for i, t in enumerate(take) if t == 0]
    if starving:
        cls = int(data.labels[classes[starving[0]][0]])
        raise ValueError(f"class {cls} would receive no training examples")
    train_idx = []
    rest_idx = []
    for members, t in zip(classes, take):
        perm = rng.permutation(members.size)
        train_idx.append(members[perm[:t]])
        rest_idx.append(members[perm[t:]])
    train_idx = np.sort(np.concatenate(train_idx))
    rest_idx = np.sort(np.concatenate(rest_idx))
    if rest_idx.size == 0:
        raise ValueError("split leaves no held-out examples")
    return data.subset(train_idx), data.subset(rest_idx)
