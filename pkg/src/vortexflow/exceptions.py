"""Exception hierarchy shared across the package."""


class VortexFlowError(Exception):
    """Base class for all package errors."""


class NonZeroMean(VortexFlowError, ValueError):
    """Poisson data has a mean component, so the inverse Laplacian is ill-posed."""


class CocycleError(VortexFlowError, ValueError):
    """Seam transition data is inconsistent with the bundle degree."""


class BlowUp(VortexFlowError, FloatingPointError):
    """The section left the a-priori compact region by a wide margin."""


class MaxTimeReached(VortexFlowError):
    """Integration stopped at ``t_max`` before the gradient tolerance was met.

    The partial report is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotConverged(VortexFlowError):
    pass


class InsufficientDecay(VortexFlowError, ValueError):
    pass


class Inconclusive(VortexFlowError):
    pass


class ViolationDetected(VortexFlowError, AssertionError):
    pass


class NotCritical(VortexFlowError, ValueError):
    pass


class NotUnstable(VortexFlowError, ValueError):
    pass


class NewtonDiverged(VortexFlowError, ArithmeticError):
    pass


class RankAmbiguous(VortexFlowError, ValueError):
    pass


class DegenerateSamples(VortexFlowError, ValueError):
    pass


class ConfigError(VortexFlowError, ValueError):
    pass
