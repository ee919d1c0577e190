"""Tour of the synthetic circle benchmark.

Samples the three-class distribution on the unit circle, reports its
irreducible (Bayes) top-k errors, trains two baseline classifiers, and
compares their top-1/top-2 test accuracy.
"""

import numpy as np

from topklearn import (
    CircleSpec,
    LossSpec,
    TrainConfig,
    circle_bayes_topk_error,
    generate_circle,
    sdca_train,
    topk_accuracy,
)

train, val, test = generate_circle(CircleSpec(n_train=200, n_val=200,
                                              n_test=50000, seed=0))
print(f"train/val/test sizes: {train.n}/{val.n}/{test.n}")
print(f"class counts (train): {np.bincount(train.labels)[1:]}")
print(f"Bayes top-1 accuracy: {100 * (1 - circle_bayes_topk_error(1)):.1f}%")
print(f"Bayes top-2 accuracy: {100 * (1 - circle_bayes_topk_error(2)):.1f}%")
print()

for label, spec in [
    ("multiclass hinge (top-1 surrogate)", LossSpec("multi_hinge_topk_alpha", k=1)),
    ("softmax", LossSpec("softmax_topk_entropy", k=1)),
]:
    lam = 1.0 / (4.0 * train.n)  # C = 4, a mid-grid value that works well here
    model, rep = sdca_train(train, TrainConfig(loss=spec, lam=lam,
                                               max_epochs=500,
                                               gap_tolerance=1e-4))
    acc = topk_accuracy(model, test, 2)
    print(f"{label:36s} epochs={rep.epochs:3d} gap={rep.gap:.1e} "
          f"top-1={acc[0]:5.1f}%  top-2={acc[1]:5.1f}%")

print()
print("Both optimize top-1 surrogates; demo 06 shows how top-k losses")
print("trade top-1 away for much better top-2.")
