"""Exception types shared across the package."""


class TorusMAError(Exception):
    """Base class for package-specific failures."""


class NotOmegaPshError(TorusMAError):
    """Input is grossly outside the omega-psh cone."""


class DominationError(TorusMAError):
    """A measure is not dominated by the Monge-Ampere measure of the given candidate."""


class DivergenceError(TorusMAError):
    """Newton iteration could not produce an admissible iterate."""


class PreconditionError(TorusMAError):
    """An operation precondition was violated (bad radius, mismatched data, ...)."""


class ConfigError(TorusMAError):
    """Malformed experiment configuration."""
