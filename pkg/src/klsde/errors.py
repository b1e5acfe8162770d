"""Exception hierarchy shared by all modules."""


class KlsdeError(Exception):
    """Base class for all errors raised by klsde."""


class ValidationError(KlsdeError, ValueError):
    """Input failed a shape, finiteness or range check."""


class DimensionError(ValidationError):
    """Operand shapes are incompatible."""


class DomainError(ValidationError):
    """Argument lies outside the domain where the operation is defined."""


class NumericalError(KlsdeError, ArithmeticError):
    """A numerical kernel failed (no convergence, singular system, ...)."""


class SingularityError(NumericalError):
    """A linear system or matrix equation is (numerically) singular."""


class StrategyUnavailable(KlsdeError):
    """The requested evaluation strategy cannot be used for this problem."""


class BoundUnavailable(NumericalError):
    """An a-priori bound cannot be formed because its hypotheses fail."""


class AssumptionError(DomainError):
    """A theorem hypothesis (e.g. negative semidefinite drift) is violated."""


class ConfigError(KlsdeError):
    """A benchmark configuration is malformed."""
