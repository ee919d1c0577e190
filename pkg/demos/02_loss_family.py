"""The loss family on a single score vector.

Shows the top-k error, the hinge variants and their smoothed versions,
the entropic losses, and the structural relations between them: the
k = 1 reductions, the alpha <= beta ordering, and the way top-k losses
forgive mistakes that stay inside the top k.
"""

import numpy as np

from topklearn import LossSpec, ScoreContext, eval_loss, topk_error

scores = np.array([1.4, 2.1, 0.3, -0.5])  # truth is class 1, outranked by 2
ctx = ScoreContext(scores, y=1)
print(f"scores = {scores}, truth = class 1 (second-highest score)")
print(f"top-1 error: {topk_error(scores, 1, 1)}   "
      f"top-2 error: {topk_error(scores, 1, 2)}")
print()

rows = [
    ("multiclass hinge", LossSpec("multi_hinge_topk_alpha", k=1)),
    ("top-2 hinge (sum-capped)", LossSpec("multi_hinge_topk_alpha", k=2)),
    ("top-2 hinge (radius-capped)", LossSpec("multi_hinge_topk_beta", k=2)),
    ("smooth top-2 hinge, gamma=1", LossSpec("multi_hinge_topk_alpha_smooth",
                                             k=2, gamma=1.0)),
    ("softmax", LossSpec("softmax_topk_entropy", k=1)),
    ("top-2 entropy", LossSpec("softmax_topk_entropy", k=2)),
    ("truncated top-2 entropy", LossSpec("truncated_topk_entropy", k=2)),
]
for label, spec in rows:
    print(f"{label:29s} -> {eval_loss(spec, ctx):8.4f}")

print()
print("The top-1 losses stay large (the truth is outranked) while every")
print("top-2 loss is small: the mistake is already inside the top 2, and")
print("the truncated entropy drops the offending score entirely.")

k1a = eval_loss(LossSpec("multi_hinge_topk_alpha", k=1), ctx)
k1b = eval_loss(LossSpec("multi_hinge_topk_beta", k=1), ctx)
soft = eval_loss(LossSpec("softmax_topk_entropy", k=1), ctx)
trunc1 = eval_loss(LossSpec("truncated_topk_entropy", k=1), ctx)
print()
print(f"k=1 reductions: alpha == beta == multiclass hinge ({k1a} == {k1b}),")
print(f"truncated k=1 == softmax ({trunc1:.6f} == {soft:.6f})")
