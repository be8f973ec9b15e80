"""ReLU singular values of a single layer versus its linear singular values.

Run: python demos/01_relu_singular_values.py
"""

import numpy as np

from relu_spectra import (
    ReluLayer,
    Rng,
    RsvConfig,
    relu_mask,
    rsv_upper_bound_curve,
    sphere_eval_set,
    svd,
)

# A 4x4 Gaussian layer with no bias, probed on 1024 points of the unit sphere.
a = Rng(0).normal((4, 4))
layer = ReluLayer(a)
xs = sphere_eval_set(4, count=1024, seed=1)

# The factors start at the truncated SVD, so the bound can only improve on sigma_k.
curve = rsv_upper_bound_curve(layer, xs, RsvConfig(steps=2000))

print(" k   sigma_k   relu bound")
for k, _, bound, sigma in curve.rows():
    print(f"{k:2d}  {sigma:8.4f}  {bound:10.4f}")

# Rank 0 is closed form: the best rank-0 approximation is the zero map.
print("max |relu(Ax)| on the sample:", np.max(np.linalg.norm(layer(xs.points), axis=1)))

# The mask identity: relu(Ax) = D_x U S V^T x with D_x the active-unit mask.
x = xs.points[0]
dec = svd(a)
print("mask identity error:",
      np.abs(layer(x) - relu_mask(layer, x) * (dec.u @ (dec.sigma * (dec.v.T @ x)))).max())
