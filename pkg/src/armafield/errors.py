"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ArmaFieldError(Exception):
    exit_code = 2


class UnstableParametersError(ArmaFieldError):
    """Raised when a synthesis recursion diverges."""

    exit_code = 2


class EstimationError(ArmaFieldError):
    """A linear system stayed singular after ridge regularization."""

    exit_code = 2


class DegenerateFieldError(ArmaFieldError):
    """Field (or block) carries no usable second-order structure."""

    exit_code = 3


class PGMFormatError(ArmaFieldError, ValueError):
    exit_code = 4
