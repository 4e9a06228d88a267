"""The divergence-free conductivity on R^6 and its CV ratio.

Shows div W = 0 at random points, the CV ratio approaching sqrt(1/2) as |x6|
grows, and the classifier's verdict on the certifiable range.
"""

import math

import numpy as np

from condlab import classifier as cl
from condlab import conductivity_zoo as zoo
from condlab.geometry import divergence_w
from condlab.tensor_core import cv_values

nc = zoo.r6_example()
pts = np.random.default_rng(0).uniform(-3, 3, (100, 6))
print(f"max |div W| at 100 points    {np.abs(divergence_w(nc.manifold, nc.field, pts)).max():.1e}")
for x6 in (0.0, 1.0, 2.0, 3.0, 5.0, 8.0):
    p = np.zeros((1, 6))
    p[0, 5] = x6
    cv = cv_values(nc.field(p), nc.manifold.g(p), validate=False)[0]
    print(f"cv at x6 = {x6:<4}              {cv:.12f}")
print(f"sqrt(1/2)                    {math.sqrt(0.5):.12f}")
rep = cl.check_cv(nc.manifold, nc.field, cl.CriterionSpec(cl.CV_CRITERION, horizon=3.0, budget=256))
print(f"verdict                      {rep.verdict}")
