"""Exception and warning types raised across the package."""


class ParameterError(ValueError):
    """A model or distribution parameter lies outside its admissible domain."""


class TruncationError(ValueError):
    """The truncation support is too small for the requested tail tolerance.

    Attributes
    ----------
    deficit : float
        Probability mass beyond the support that was actually achieved.
    """

    def __init__(self, message: str, deficit: float):
        super().__init__(f"{message} (achieved deficit {deficit:.3e})")
        self.deficit = deficit


class RepresentationError(ValueError):
    """Classical parameters have no thinning counterpart with eta > 0."""


class RefusalError(RuntimeError):
    """A computation was refused because its precondition does not hold."""


class NonConvergenceWarning(RuntimeWarning):
    """Fixed-point iteration stopped at its iteration cap before converging."""
