"""Euclidean projections onto the top-k simplices.

The dual solver spends most of its time projecting vectors onto these
sets, so it is worth seeing what they do: the cap k spreads mass over at
least k coordinates, and the bias rho shrinks the total mass.
"""

import numpy as np

from topklearn import TopkSimplexSpec, project_topk, project_simplex_cap

b = np.array([0.9, 0.5, -0.2, 0.1])
print(f"input b = {b}")
print(f"plain simplex cap (radius 1):   {project_simplex_cap(b, 1.0)}")
print()

for k in (1, 2, 3):
    spec = TopkSimplexSpec("alpha", k=k, radius=1.0)
    x = project_topk(b, spec)
    print(f"sum-capped, k={k}: x = {np.round(x, 4)}  "
          f"(no coordinate above sum/k = {x.sum() / k:.4f})")
print()

for k in (1, 2, 3):
    spec = TopkSimplexSpec("beta", k=k, radius=1.0)
    x = project_topk(b, spec)
    print(f"radius-capped, k={k}: x = {np.round(x, 4)}  (cap 1/k = {1 / k:.4f})")
print()

for rho in (0.0, 0.5, 2.0):
    spec = TopkSimplexSpec("alpha", k=2, radius=1.0, rho=rho)
    x = project_topk(b, spec)
    print(f"bias rho={rho:3.1f}: total mass {x.sum():.4f}  x = {np.round(x, 4)}")
print()
print("Raising k forces the mass to spread; raising rho pulls it toward 0.")
