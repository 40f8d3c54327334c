"""Exception hierarchy shared by every module of the package."""


class MasteryHMMError(Exception):
    """Base class for all errors raised by masteryhmm."""


class InputDomainError(MasteryHMMError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class InvalidModelError(MasteryHMMError, ValueError):
    """Model parameters violate a stochasticity or shape invariant."""


class DegenerateObservationError(MasteryHMMError, ArithmeticError):
    """Every state assigns zero probability to an observation."""

    def __init__(self, step, sequence=None):
        self.step = step
        self.sequence = sequence
        where = f"time step {step}"
        if sequence is not None:
            where = f"sequence {sequence}, {where}"
        super().__init__(f"all states have zero emission probability at {where}")


class DegenerateStateError(MasteryHMMError, ArithmeticError):
    """A state (or mixture component) received no posterior mass."""


class ModelFormatError(MasteryHMMError, ValueError):
    """A serialized model document could not be decoded."""


class ConfigurationError(MasteryHMMError, ValueError):
    """A pipeline configuration is incomplete or inconsistent."""


class ParseError(MasteryHMMError, ValueError):
    """A tabular input file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UndefinedMetricError(MasteryHMMError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
