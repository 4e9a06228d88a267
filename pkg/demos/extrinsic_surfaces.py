"""Extrinsic verdicts for the paraboloid and the hyperbolic cylinder in R^3."""

from condlab import classifier as cl
from condlab import conductivity_zoo as zoo
from condlab import submanifold as sub
from condlab.model_space import Theta

cases = (
    ("paraboloid", sub.paraboloid(), zoo.paraboloid_conductivity(), Theta(a=1.0), 12.0),
    ("hyperbolic cylinder", sub.hyperbolic_cylinder(1.0), zoo.hyperbola_conductivity(), Theta(a=0.5), 8.0),
)
for name, surface, W, theta, horizon in cases:
    spec = cl.CriterionSpec(cl.EXTRINSIC_MAIN, q=1, theta=theta, rho=1.0, side=cl.UPPER, horizon=horizon, budget=256)
    rep = sub.classify_extrinsic(surface, W, spec)
    print(f"{name:<20} {rep.verdict:<12} weight {rep.weight}  tail {rep.tail_evidence['tail_estimate']:.6f}")
