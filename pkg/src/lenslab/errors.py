"""Exception types shared across the package."""


class LensLabError(Exception):
    """Base class for all lenslab errors."""


class DomainError(LensLabError):
    """A chart point lies outside the manifold's chart domain."""


class IdentificationError(LensLabError):
    """Boundary types or sampling specs do not match under the boundary identification."""


class ContractError(LensLabError):
    """An input violates a documented precondition (non-unit vector, outward start, ...)."""


class IntegrationError(LensLabError):
    """The adaptive integrator failed (step-size underflow, energy blow-up)."""


class NoConnectionError(LensLabError):
    """The two-point shooting solver did not converge within its multistart budget."""


class NearGrazingError(LensLabError):
    """Entry angle too close to tangential for the quadrature route."""


class NotDifferentiableError(LensLabError):
    """A finite-difference stencil crossed a status change (Exited <-> Trapped/Grazing)."""


class ConfigError(LensLabError):
    """A config file failed to parse or validate; carries a line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
