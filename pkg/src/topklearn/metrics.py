"""Top-k accuracy tables and model selection over the C grid.

The regularization knob is exposed SVM-style as C = 1/(lambda * n); the
grid is swept once per loss configuration, every trained model is scored
on the validation set for all k up to K_max, and the best C is then
selected separately for each target k (ties go to the smaller C, and a
selection landing on a grid edge is flagged).

Grid points are independent, so they can be trained in parallel worker
processes; TOPK_THREADS caps the worker count (default: logical cores).
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gd import GdConfig, gd_train
from .losses import LossSpec
from .sdca import TrainConfig, sdca_train

__all__ = [
    "GridSpec",
    "MetricsRow",
    "MetricsTable",
    "topk_accuracy",
    "cross_validate",
    "CvResult",
    "worker_count",
]


def worker_count(n_tasks):
    env = os.environ.get("TOPK_THREADS", "")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise ValueError(f"TOPK_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, n_tasks))


def parallel_map(fn, items):
    """Order-preserving map over items, using worker processes when
    TOPK_THREADS allows more than one."""
    workers = worker_count(len(items))
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class GridSpec:
    """C values to sweep; defaults to powers of two from 2^-18 to 2^18."""

    c_values: tuple = tuple(2.0 ** e for e in range(-18, 19))
    per_k: bool = True  # select C separately for each reported top-k

    def __post_init__(self):
        if not self.c_values:
            raise ValueError("grid must be nonempty")
        if any(c <= 0 for c in self.c_values):
            raise ValueError("C values must be positive")
        object.__setattr__(self, "c_values",
                           tuple(sorted(float(c) for c in self.c_values)))


@dataclass(frozen=True)
class MetricsRow:
    method: str
    c: float
    lam: float
    k_target: int
    accuracies: tuple  # percentages for k = 1..K_max

    def csv(self):
        accs = ",".join(f"{a:.2f}" for a in self.accuracies)
        c = f"{self.c:.10g}" if math.isfinite(self.c) else ""
        k = str(self.k_target) if self.k_target > 0 else ""
        return f"{self.method},{c},{self.lam:.10g},{k},{accs}"


@dataclass
class MetricsTable:
    k_max: int
    n_eval: int = 0  # size of the set the accuracies were measured on
    rows: list = field(default_factory=list)

    def header(self):
        ks = ",".join(f"top{k}" for k in range(1, self.k_max + 1))
        return f"method,C,lambda,k_target,{ks}"

    def write_csv(self, fh):
        fh.write(self.header() + "\n")
        for row in self.rows:
            fh.write(row.csv() + "\n")


def topk_accuracy(model, data, k_max):
    """Accuracy percentages for k = 1..k_max.

    An example counts as correct at k unless at least k classes score
    strictly higher than the truth, so ties favor the truth and the
    result is non-decreasing in k.
    """
    if not 1 <= k_max <= model.m:
        raise ValueError(f"k_max must be in [1, {model.m}]")
    scores = model.scores(data.features)
    truth = scores[data.labels - 1, np.arange(data.n)]
    n_above = (scores > truth).sum(axis=0)
    return np.array([100.0 * float((n_above < k).mean())
                     for k in range(1, k_max + 1)])


@dataclass
class CvResult:
    table: MetricsTable
    selected: dict          # target k -> (C, Model)
    boundary: dict          # target k -> bool, selected C sits on a grid edge
    val_accuracies: dict    # C -> accuracy vector on the validation set
    models: dict            # C -> Model
    reports: dict           # C -> training report


def _default_trainer(train_data, loss, lam, seed, max_epochs, gap_tolerance,
                     gap_check_every=1, gd_max_iters=500):
    """Train one grid point. The truncated entropy loss is nonconvex:
    train a softmax model at the same regularization first and descend
    from it; every convex family goes straight to the dual solver."""
    if loss.family == "truncated_topk_entropy":
        warm_cfg = TrainConfig(loss=LossSpec("softmax_topk_entropy", k=1),
                               lam=lam, max_epochs=max_epochs,
                               gap_tolerance=gap_tolerance, seed=seed,
                               gap_check_every=gap_check_every)
        warm, _ = sdca_train(train_data, warm_cfg)
        return gd_train(train_data, loss, lam,
                        GdConfig(init=warm, max_iters=gd_max_iters))
    cfg = TrainConfig(loss=loss, lam=lam, max_epochs=max_epochs,
                      gap_tolerance=gap_tolerance, seed=seed,
                      gap_check_every=gap_check_every)
    return sdca_train(train_data, cfg)


def _cv_worker(args):
    (train_data, val_data, loss, c, seed, k_max, max_epochs, gap_tol,
     gap_check_every, gd_max_iters) = args
    lam = 1.0 / (c * train_data.n)
    model, report = _default_trainer(train_data, loss, lam, seed,
                                     max_epochs, gap_tol, gap_check_every,
                                     gd_max_iters)
    accs = topk_accuracy(model, val_data, k_max)
    return model, report, accs


def _fold_worker(args):
    (train_data, fold_masks, loss, c, seed, k_max, max_epochs, gap_tol,
     gap_check_every, gd_max_iters) = args
    # average held-out accuracy over the folds, then refit on all data
    accs = np.zeros(k_max)
    for held in fold_masks:
        sub = train_data.subset(np.nonzero(~held)[0])
        lam = 1.0 / (c * sub.n)
        model, _ = _default_trainer(sub, loss, lam, seed, max_epochs,
                                    gap_tol, gap_check_every, gd_max_iters)
        accs += topk_accuracy(model, train_data.subset(np.nonzero(held)[0]),
                              k_max)
    accs /= len(fold_masks)
    lam = 1.0 / (c * train_data.n)
    model, report = _default_trainer(train_data, loss, lam, seed,
                                     max_epochs, gap_tol, gap_check_every,
                                     gd_max_iters)
    return model, report, accs


def _stratified_fold_masks(data, n_folds, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    assignment = np.empty(data.n, dtype=np.int64)
    for cls in range(1, data.m + 1):
        members = np.nonzero(data.labels == cls)[0]
        if members.size < n_folds:
            raise ValueError(
                f"class {cls} has {members.size} examples, fewer than "
                f"{n_folds} folds")
        assignment[members[rng.permutation(members.size)]] = \
            np.arange(members.size) % n_folds
    return [assignment == f for f in range(n_folds)]


def cross_validate(train_data, val_data=None, loss=None, grid=None,
                   target_ks=(1,), k_max=None, seed=0, max_epochs=300,
                   gap_tolerance=1e-3, gap_check_every=1, gd_max_iters=500,
                   n_folds=None):
    """Sweep the C grid once and select per-target-k champions.

    Selection uses a fixed validation set when val_data is given, or
    stratified n_folds cross-validation on the training data otherwise
    (fold-averaged accuracy decides, and the returned model per C is
    refit on all of train_data). Each C trains a single model reused by
    every target k; ties prefer the smaller C.
    """
    if loss is None:
        raise ValueError("loss is required")
    if (val_data is None) == (n_folds is None):
        raise ValueError("provide exactly one of val_data or n_folds")
    grid = grid or GridSpec()
    m = train_data.m
    k_max = k_max or min(m, max(max(target_ks), 1))
    if any(not 1 <= k <= m for k in target_ks):
        raise ValueError("target ks must lie in 1..m")

    if val_data is not None:
        tasks = [(train_data, val_data, loss, c, seed, k_max, max_epochs,
                  gap_tolerance, gap_check_every, gd_max_iters)
                 for c in grid.c_values]
        outcomes = parallel_map(_cv_worker, tasks)
        n_eval = val_data.n
    else:
        masks = _stratified_fold_masks(train_data, n_folds, seed)
        tasks = [(train_data, masks, loss, c, seed, k_max, max_epochs,
                  gap_tolerance, gap_check_every, gd_max_iters)
                 for c in grid.c_values]
        outcomes = parallel_map(_fold_worker, tasks)
        n_eval = train_data.n

    result = CvResult(table=MetricsTable(k_max=k_max, n_eval=n_eval),
                      selected={}, boundary={}, val_accuracies={},
                      models={}, reports={})
    for c, (model, report, accs) in zip(grid.c_values, outcomes):
        result.models[c] = model
        result.reports[c] = report
        result.val_accuracies[c] = accs

    for k in target_ks:
        best_c = None
        best_acc = -1.0
        for c in grid.c_values:  # ascending, so ties keep the smaller C
            acc = result.val_accuracies[c][k - 1]
            if acc > best_acc:
                best_acc, best_c = acc, c
        model = result.models[best_c]
        result.selected[k] = (best_c, model)
        result.boundary[k] = best_c in (grid.c_values[0], grid.c_values[-1])
        result.table.rows.append(MetricsRow(
            method=loss.family, c=best_c, lam=model.lam, k_target=k,
            accuracies=tuple(result.val_accuracies[best_c])))
    return result
