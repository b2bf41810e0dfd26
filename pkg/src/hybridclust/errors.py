"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad inputs: shapes, ranges, malformed files. CLI exit code 1."""


class NumericalError(RuntimeError):
    """Numerical failure: non-SPD covariance, failed fit, ... CLI exit code 2."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance.

    Carries the partial estimate and its error bound so callers can decide
    whether to accept it anyway.
    """

    def __init__(self, message: str, partial: float, error_bound: float):
        super().__init__(f"{message} (partial estimate {partial!r}, error bound {error_bound!r})")
        self.partial = partial
        self.error_bound = error_bound
