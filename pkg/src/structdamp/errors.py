"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class AliasingError(DomainError):
    """A grid is too coarse to represent the requested basis without aliasing."""


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or validated."""


class NonContractionError(RuntimeError):
    """The Picard iteration failed to contract.

    The partially filled :class:`~structdamp.evolution.ConvergenceReport` is
    available as ``report`` so callers can still write it out.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report
