"""Exception hierarchy shared by all modules."""


class EsfemError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(EsfemError, ValueError):
    """Invalid geometric query (degenerate normal, point off the surface)."""


class LiftError(GeometryError):
    """Closest-point projection did not converge."""


class UnsupportedElementError(EsfemError, ValueError):
    pass


class DegenerateElementError(EsfemError):
    pass


class SolverError(EsfemError):
    """Iterative solve failed; ``residual`` holds the final relative residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class EocError(EsfemError, ValueError):
    pass
