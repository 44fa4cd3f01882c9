"""Exception types shared across the package."""


class ConfGeomError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ConfGeomError, ValueError):
    pass


class DegenerateMetric(ConfGeomError):
    pass


class NullPivot(ConfGeomError):
    pass


class GridTooSmall(ConfGeomError, ValueError):
    pass


class MissingConnection(ConfGeomError, ValueError):
    pass


class MaskedIntegrationDomain(ConfGeomError):
    pass


class PointAtInfinity(ConfGeomError):
    """A node falls on the hyperplane excluded by the target chart."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = list(nodes)


class SignatureMismatch(ConfGeomError, ValueError):
    pass


class UnknownSurface(ConfGeomError, KeyError):
    pass


class InvalidParameter(ConfGeomError, ValueError):
    pass


class NonRegular(ConfGeomError):
    """Too few nodes of the submanifold are regular."""

    def __init__(self, message, fraction_regular=0.0):
        super().__init__(message)
        self.fraction_regular = fraction_regular


class BumpSupportError(ConfGeomError, ValueError):
    pass


class StencilOrderError(ConfGeomError, ValueError):
    pass
