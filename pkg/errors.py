"""Exception hierarchy. Every error carries the CLI exit code it maps to."""


class ExplabError(Exception):
    exit_code = 1


class InputFormatError(ExplabError, ValueError):
    """Unreadable or malformed input file."""
    exit_code = 2


class AlphabetMismatchError(ExplabError, ValueError):
    exit_code = 3


class DistributionError(ExplabError, ValueError):
    """A probability vector, channel row, state or POVM violates its invariants."""
    exit_code = 3


class DomainError(ExplabError, ValueError):
    exit_code = 3


class UndefinedDerivativeError(ExplabError, ValueError):
    exit_code = 3


class TiltUndefinedError(ExplabError, ValueError):
    exit_code = 3


class OracleScaleError(ExplabError):
    exit_code = 4


class EnumerationScaleError(ExplabError):
    exit_code = 4


class UnsupportedDimensionError(ExplabError):
    exit_code = 5
