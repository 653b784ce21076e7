"""Exception hierarchy shared by all catprobe modules."""


class CatprobeError(Exception):
    """Base class for every error raised by catprobe."""


class ConfigurationError(CatprobeError, ValueError):
    """A parameter is outside its allowed range."""


class PreconditionError(CatprobeError, ValueError):
    """An input violates an operation's precondition (e.g. not normalized)."""


class DataError(CatprobeError, ValueError):
    """Malformed data: wrong dimensions, probabilities outside [0, 1], ..."""


class EstimationError(CatprobeError):
    """Not enough data to form an estimate."""


class NumericalError(CatprobeError, ArithmeticError):
    """A numerical routine (eigensolver, integrator) failed."""


class ContractViolation(CatprobeError):
    """An object was used outside the contract it was built for."""
