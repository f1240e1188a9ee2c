"""Exception hierarchy shared by all modules."""


class NijHydroError(Exception):
    """Base class for every error raised by the package."""


class EvaluationError(NijHydroError):
    """A field was evaluated outside its domain or produced non-finite data."""


class DimensionMismatch(NijHydroError):
    pass


class NotGlRegular(NijHydroError):
    pass


class DoesNotCommute(NijHydroError):
    pass


class CayleyHamiltonViolated(NijHydroError):
    """L·A_{n-1} differs from sigma_n·Id beyond tolerance (numerical breakdown)."""


class NotASymmetry(NijHydroError):
    pass


class NotAConservationLaw(NijHydroError):
    pass


class NotAHierarchy(NijHydroError):
    pass


class NotRegular(NijHydroError):
    pass


class NotClosed(NijHydroError):
    pass


class QuadratureFailure(NijHydroError):
    pass


class InsufficientJetOrder(NijHydroError):
    pass


class UnsupportedBlockSize(NijHydroError):
    pass


class SingularHierarchyMatrix(NijHydroError):
    pass


class NotCyclicVelocity(NijHydroError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class NonMonotoneEigenvalueCoordinate(NijHydroError):
    pass


class SmoothnessDeficit(NijHydroError):
    pass


class OutOfSampledRange(NijHydroError):
    pass


class NewtonDiverged(NijHydroError):
    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class GridTooCoarse(NijHydroError):
    pass


class ConfigError(NijHydroError):
    pass
