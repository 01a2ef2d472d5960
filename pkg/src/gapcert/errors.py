"""Exception hierarchy shared by every gapcert module."""


class GapcertError(Exception):
    """Base class for all library errors."""


class SizeError(GapcertError):
    """An operator would exceed the configured dimension cap."""


class ShapeError(GapcertError, ValueError):
    """Dimensions of operands do not line up."""


class SymmetryError(GapcertError, ValueError):
    """A matrix that must be Hermitian is not."""


class DomainError(GapcertError, ValueError):
    """A scalar argument is outside the domain of a formula."""


class ConvergenceError(GapcertError):
    """The iterative eigensolver did not reach the requested tolerance."""

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class DegeneracyAmbiguityError(GapcertError):
    """An eigenvalue sits too close to the kernel cut to be classified."""

    def __init__(self, message, eigenvalue=float("nan")):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ModelInconsistencyError(GapcertError):
    """A closed-form construction failed its numerical self-check."""


class HypothesisViolatedError(DomainError):
    """The hypothesis of a bound (for example g_tilde > 2 delta) fails."""


class SplitNotFoundError(GapcertError):
    """No commuting split of the renormalized coupling was found."""


class WitnessNotFoundError(GapcertError):
    """The finite-size criterion was not met below the search cap."""
