"""Exception types shared across the package."""


class KoopgenError(Exception):
    """Base class for all package-specific errors."""


class InputError(KoopgenError, ValueError):
    """Malformed numerical input (wrong shape, non-finite entries)."""


class DomainError(KoopgenError, ValueError):
    """A point lies outside the domain a basis is defined on."""


class UnsupportedDictionaryError(KoopgenError, TypeError):
    """The requested operation needs basis features this dictionary lacks."""


class IntegrationError(KoopgenError, RuntimeError):
    """Trajectory integration produced a non-finite state."""


class ClosureError(KoopgenError, ValueError):
    """A function needed in coefficient space is not in the dictionary span."""


class LogBranchError(KoopgenError, ValueError):
    """Matrix logarithm undefined: eigenvalue on the closed negative real axis."""


class IdentificationError(KoopgenError, ValueError):
    """System identification failed (e.g. diffusion not positive semidefinite)."""


class NumericalError(KoopgenError, RuntimeError):
    """A dense linear-algebra routine failed to converge."""


class ConfigError(KoopgenError, ValueError):
    """Invalid experiment configuration."""


class StabilityError(KoopgenError, ValueError):
    """Explicit time step violates the integrator stability bound."""
