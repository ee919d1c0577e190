"""Linear model container and its text serialization format.

A model is just the d x m weight matrix plus the loss configuration and
regularization it was trained with. The on-disk format is line-oriented
text with 17-significant-digit decimals, which round-trips doubles
exactly and stays diffable:

    topk-model v1
    <d> <m> <family> <k> <gamma> <lambda>
    <d numbers>     # line y holds the column w_y
    ...             # m such lines
"""

from dataclasses import dataclass

import numpy as np

from .losses import LossSpec

__all__ = ["Model", "save_model", "load_model"]

_MAGIC = "topk-model v1"


@dataclass(frozen=True)
class Model:
    weights: np.ndarray  # d x m
    loss: LossSpec
    lam: float

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if w.ndim != 2:
            raise ValueError("weights must be a d x m matrix")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.weights.shape[0]

    @property
    def m(self):
        return self.weights.shape[1]

    def scores(self, features):
        """Class scores, one column per example (m x n)."""
        if features.shape[0] != self.d:
            raise ValueError(
                f"feature dimension {features.shape[0]} != model dimension {self.d}")
        return self.weights.T @ features


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(f"{model.d} {model.m} {model.loss.family} "
                 f"{model.loss.k} {model.loss.gamma:.17g} {model.lam:.17g}\n")
        for y in range(model.m):
            fh.write(" ".join(f"{v:.17g}" for v in model.weights[:, y]) + "\n")


def load_model(path):
    with open(path, "r") as fh:
        magic = fh.readline().rstrip("\n")
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a model file (bad header {magic!r})")
        meta = fh.readline().split()
        if len(meta) != 6:
            raise ValueError(f"{path}: malformed metadata line")
        d, m = int(meta[0]), int(meta[1])
        spec = LossSpec(family=meta[2], k=int(meta[3]), gamma=float(meta[4]))
        lam = float(meta[5])
        weights = np.empty((d, m))
        for y in range(m):
            row = fh.readline().split()
            if len(row) != d:
                raise ValueError(f"{path}: expected {d} weights on line {y + 3}")
            weights[:, y] = [float(v) for v in row]
    return Model(weights=weights, loss=spec, lam=lam)
