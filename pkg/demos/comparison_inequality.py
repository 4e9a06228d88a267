"""Numeric capacity of W_(2, 1/2) on B_4 \\ B_1 against two model lower bounds.

The bound uses Vol_W(dB_1) / int_1^4 e^(-h). With the weight h(t) = (t^2 - 1)/2,
which matches <div W, grad r> = r <W grad r, grad r>, the bound holds. With
h(t) = t^2 - 1 it exceeds even the energy of the best radial test function.
"""

import math

from scipy import integrate

from condlab import conductivity_zoo as zoo
from condlab.capacity_solver import capacity, vol_w_sphere

nc = zoo.w_lambda_alpha(2.0, 0.5)
est = capacity(nc.manifold, nc.field, 1.0, 4.0, ladder=((64, 64), (128, 128), (256, 256)))
vol = vol_w_sphere(nc.manifold, nc.field, 1.0)
radial = 2 * math.pi * 3 / integrate.quad(lambda r: math.exp(-0.5 * r * r) / r, 1.0, 4.0)[0]
print(f"Cap_W(B_1, B_4)          {est.richardson_extrapolate:.4f} +- {est.error_bar:.1e}  (order {est.observed_order:.2f})")
print(f"radial test function     {radial:.4f}  (upper bound)")
for label, h in (("h = (t^2 - 1)/2", lambda t: 0.5 * (t * t - 1)), ("h = t^2 - 1", lambda t: t * t - 1)):
    bound = vol / integrate.quad(lambda t: math.exp(-h(t)), 1.0, 4.0)[0]
    status = "holds" if est.richardson_extrapolate - est.error_bar >= bound else "violated"
    print(f"{label:<24} {bound:.4f}  {status}")
