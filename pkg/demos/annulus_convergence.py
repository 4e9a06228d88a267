"""Capacity of the Euclidean annulus B_2 \\ B_1 on a refining ladder of grids.

Prints each rung, the observed order of convergence and the Richardson value
next to the closed form 2 pi / ln 2.
"""

import math

import numpy as np

from condlab.capacity_solver import capacity
from condlab.geometry import euclidean

eye = np.eye(2)


def identity(x):
    return np.broadcast_to(eye, np.asarray(x).shape[:-1] + (2, 2)).copy()


est = capacity(euclidean(2), identity, 1.0, 2.0, ladder=((32, 32), (64, 64), (128, 128), (256, 256)))
exact = 2 * math.pi / math.log(2)
for rung in est.ladder:
    print(f"{rung['n_r']:>4} x {rung['n_theta']:<4} energy {rung['energy']:.10f}  error {rung['energy'] - exact:+.2e}")
print(f"observed order   {est.observed_order:.3f}")
print(f"extrapolated     {est.richardson_extrapolate:.10f}  (closed form {exact:.10f})")
