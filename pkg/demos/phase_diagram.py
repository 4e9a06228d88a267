"""Verdicts for the planar family W_(lambda, alpha) = e^(alpha r^2)(Id + lambda N N^T).

The sign of alpha decides: alpha <= 0 is parabolic, alpha > 0 hyperbolic.
"""

from condlab.verification import PHASE_ALPHAS, PHASE_LAMBDAS, wlambdaalpha_phase

grid = wlambdaalpha_phase()
print("lambda \\ alpha " + "".join(f"{a:>14}" for a in PHASE_ALPHAS))
for lam in PHASE_LAMBDAS:
    print(f"{lam:>14} " + "".join(f"{grid[(lam, a)][0]:>14}" for a in PHASE_ALPHAS))
