"""Numerical laboratory for Laplacians weighted by a conductivity tensor.

Capacities of annuli, curvature-derived conductivities, and comparison
criteria that certify a conductivity as parabolic or hyperbolic, for charts
of Riemannian manifolds and for immersed surfaces.
"""

__version__ = "0.1.0"

from .capacity_solver import CapacityEstimate, capacity, capacity_ratio_bounds, solve_dirichlet
from .classifier import (
    HYPERBOLIC,
    PARABOLIC,
    THEOREMS,
    UNDECIDED,
    ClassificationReport,
    CriterionSpec,
    classify,
    combine,
    replay,
)
from .conductivity_zoo import NamedConductivity, build
from .errors import CondlabError
from .geometry import ChartManifold, curvature, euclidean, normal_chart, polar_chart
from .model_space import RadialProfile, Theta, WarpedModel, capacity_model, radial_solution, tail_convergence
from .submanifold import ImmersedSubmanifold, classify_extrinsic, w_mean_curvature
from .tensor_core import cv_values, validate_conductivity
from .verification import verify_example

__all__ = [
    "CapacityEstimate", "ChartManifold", "ClassificationReport", "CondlabError", "CriterionSpec",
    "HYPERBOLIC", "ImmersedSubmanifold", "NamedConductivity", "PARABOLIC", "RadialProfile", "THEOREMS",
    "Theta", "UNDECIDED", "WarpedModel", "build", "capacity", "capacity_model", "capacity_ratio_bounds",
    "classify", "classify_extrinsic", "combine", "curvature", "cv_values", "euclidean", "normal_chart",
    "polar_chart", "radial_solution", "replay", "solve_dirichlet", "tail_convergence", "validate_conductivity",
    "verify_example", "w_mean_curvature",
]
