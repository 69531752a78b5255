"""Exception types raised across the package."""


class JacobiError(Exception):
    """Base class for all package errors."""


class InvalidOperator(JacobiError, ValueError):
    def __init__(self, report):
        self.report = report
        super().__init__("invalid operator: " + "; ".join(str(v) for v in report.violations))


class NotNeighbors(JacobiError, ValueError):
    pass


class InvalidAxis(JacobiError, ValueError):
    pass


class NotHermitian(JacobiError, ValueError):
    pass


class IncommensurateTorus(JacobiError, ValueError):
    pass


class GeometryMismatch(JacobiError, ValueError):
    pass


class GridMismatch(JacobiError, ValueError):
    pass


class TorusWithoutUnwrapConvention(JacobiError, ValueError):
    pass


class RadiusTooLarge(JacobiError, ValueError):
    pass


class ResourceGuard(JacobiError):
    """Raised when a computation would exceed a size or accuracy guard."""


class TooLarge(ResourceGuard):
    pass


class BoundaryContamination(ResourceGuard):
    pass
