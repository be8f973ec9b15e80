"""Gaussian mean widths of point sets and of linear maps.

Run: python demos/02_mean_widths.py
"""

import math

import numpy as np

from relu_spectra import Rng, c_const, gmw_operator_linear, gmw_set
from relu_spectra.meanwidth import hull_diff_lp, sup_linear_over_hull_diff
from relu_spectra.tensor_core import sample_sphere

# Width of the segment between e1 and -e1: E|2 g_1| = 2 sqrt(2/pi).
segment = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
est = gmw_set(segment, 10_000, Rng(0))
print(f"segment  {est.value:.4f} +- {est.stderr:.4f}   exact {2 * math.sqrt(2 / math.pi):.4f}")

# A dense sphere sample approaches the ball, whose width is 2 c_3.
sphere = sample_sphere(Rng(1), 4096, 3)
est = gmw_set(sphere, 10_000, Rng(2))
print(f"sphere   {est.value:.4f} +- {est.stderr:.4f}   ball  {2 * c_const(3):.4f}")

# For one direction the hull supremum is a small LP; its optimum is max - min of K g.
k, g = Rng(3).normal((20, 4)), Rng(4).normal(4)
print("LP", hull_diff_lp(k, g), "closed form", sup_linear_over_hull_diff(k, g))

# Operator width of a linear map, by two routes with independent draws.
a = Rng(5).normal((5, 3))
t = gmw_operator_linear(a, 5000, Rng(6), via="transpose")
s = gmw_operator_linear(a, 5000, Rng(7), via="singular_values")
print(f"||A^T u|| route {t.value:.4f} +- {t.stderr:.4f}")
print(f"||S^T u|| route {s.value:.4f} +- {s.stderr:.4f}")
