"""Exception types raised across the package."""


class FrustRegError(Exception):
    """Base class for every error raised by frustreg."""


class RotationNearPi(FrustRegError, ValueError):
    """The SE(3) log is not unique because the rotation angle is too close to pi."""


class NotPlanar(FrustRegError, ValueError):
    pass


class DepthZero(FrustRegError, ValueError):
    pass


class NotInFrustum(FrustRegError, ValueError):
    pass


class GridConfigError(FrustRegError, ValueError):
    """Image size is incompatible with 32x32 grid labeling."""


class SingularNormalEquations(FrustRegError, ArithmeticError):
    pass


class NoInFrustumPoints(FrustRegError, ValueError):
    pass


class AllStartsFailed(FrustRegError, RuntimeError):
    def __init__(self, message, reasons=()):
        super().__init__(message)
        self.reasons = list(reasons)


class NoGridLabels(FrustRegError, ValueError):
    pass


class DegenerateConfiguration(FrustRegError, ValueError):
    pass


class NoConsensus(FrustRegError, RuntimeError):
    pass


class EmptyFrustum(FrustRegError, RuntimeError):
    pass


class MalformedFile(FrustRegError, ValueError):
    pass


class IoFailure(FrustRegError, OSError):
    pass
