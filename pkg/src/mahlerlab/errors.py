"""Exception hierarchy shared by all modules."""


class GeometryError(ValueError):
    """A geometric precondition failed (empty cut, point not interior, ...)."""


class NonUniqueNormalError(GeometryError):
    """The outer normal at a boundary point is not unique."""


class ConvexityViolationError(GeometryError):
    pass


class FlatPointError(GeometryError):
    """Gauss curvature vanishes (or is below the eigenvalue floor) at the point."""


class CertificationError(GeometryError):
    pass


class InconclusiveError(RuntimeError):
    """Monte Carlo noise exceeds the signal everywhere on the grid."""


class SantaloConvergenceError(RuntimeError):
    def __init__(self, message, best_point, best_value):
        super().__init__(message)
        self.best_point = best_point
        self.best_value = best_value
