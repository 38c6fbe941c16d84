"""Exception hierarchy shared by all modules."""


class ExcursionLabError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(ExcursionLabError, ValueError):
    """A kernel, grid or experiment configuration violates a precondition."""


class GeometryError(ExcursionLabError, ValueError):
    """A rectangle or point lies outside the grid it is evaluated on."""


class GridMismatchError(ExcursionLabError, ValueError):
    pass


class QuadratureError(ExcursionLabError, ArithmeticError):
    """Numerical integration of a kernel did not converge."""


class DifferentiationError(ExcursionLabError, ArithmeticError):
    pass


class CapExceeded(ExcursionLabError):
    """Exact diameter requested on a component larger than the cell cap."""

    def __init__(self, n_cells, cap):
        super().__init__(f"component has {n_cells} cells, exact-diameter cap is {cap}")
        self.n_cells = n_cells
        self.cap = cap


class ClassificationFailure(ExcursionLabError):
    """No boundary curve encloses the component (contouring inconsistency)."""


class NotConnected(ExcursionLabError):
    pass


class SelfIntersectingPolygon(ExcursionLabError, ValueError):
    pass
