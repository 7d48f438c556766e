"""Exception types shared across the package."""


class SwaganError(Exception):
    """Base class for all package errors."""


class DimensionError(SwaganError):
    """Operand shapes are inconsistent with an operation's contract."""


class ContractError(SwaganError):
    """An operation precondition was violated."""


class FormatError(SwaganError):
    """A file does not match its declared binary/text format."""


class ConfigError(SwaganError):
    """Invalid configuration key, value, or combination."""
