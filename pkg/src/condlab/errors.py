"""Exception hierarchy.

Every error raised by the library derives from :class:`CondlabError` so the
command line front end can map them to exit status 1 with the name of the
module that raised them.
"""


class CondlabError(Exception):
    """Base class for all library errors."""

    module = "condlab"


# tensor_core
class NotSelfAdjoint(CondlabError):
    module = "tensor_core"


class NotPositiveDefinite(CondlabError):
    module = "tensor_core"


class EmptySampleSet(CondlabError):
    module = "tensor_core"


# geometry
class StencilOutOfDomain(CondlabError):
    module = "geometry"


class SingularMetric(CondlabError):
    module = "geometry"


class NotPolarAdapted(CondlabError):
    module = "geometry"


# model_space
class NonIntegrableOnFiniteInterval(CondlabError):
    module = "model_space"


# capacity_solver
class SolverDiverged(CondlabError):
    module = "capacity_solver"


# classifier
class UnboundedSpectrumDetected(CondlabError):
    module = "classifier"


class ContradictoryVerdicts(CondlabError):
    module = "classifier"


# submanifold
class RankDeficient(CondlabError):
    module = "submanifold"


class FormulaMismatch(CondlabError):
    module = "submanifold"


class NotHypersurface(CondlabError):
    module = "submanifold"


# conductivity_zoo
class DimensionTooLow(CondlabError):
    module = "conductivity_zoo"


# cli
class UnknownExample(CondlabError):
    module = "cli"


class SchemaError(CondlabError):
    module = "cli"
