"""Exception types raised by the numerical kernels and experiments."""


class HypolabError(Exception):
    """Base class for all numerical failures in the package."""


class ConvergenceError(HypolabError):
    """An iterative method stopped before meeting its tolerance.

    ``index`` identifies the offending item (eigenvalue index, mode, shot...).
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IntegrationError(HypolabError):
    """Non-finite state encountered while integrating an ODE."""

    def __init__(self, message, s):
        super().__init__(message)
        self.s = s


class QuadratureError(HypolabError):
    """Quadrature budget exhausted; carries the best available estimate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DistanceError(HypolabError):
    """No geodesic shot reached the target set."""

    def __init__(self, message, coverage=None):
        super().__init__(message)
        self.coverage = coverage
