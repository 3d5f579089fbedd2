"""Exception hierarchy shared across the toolkit."""


class SynthgridError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(SynthgridError):
    """Input file violates its documented schema (missing column, duplicate key)."""


class RowParseError(SynthgridError):
    """A single input row could not be parsed."""

    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ParameterError(SynthgridError):
    """An argument is outside its documented domain."""


class ContractError(SynthgridError):
    """Caller violated an interface contract (shape, channel, bin-edge mismatch)."""


class ValidationError(SynthgridError):
    """A record is internally inconsistent (e.g. session energy exceeds deliverable)."""


class EmptyDataError(SynthgridError):
    """An operation that needs data received none (zero complete days, empty test set)."""


class DegenerateChannelError(SynthgridError):
    """Channel is constant, so min-max scaling is undefined."""


class NumericError(SynthgridError):
    """Non-finite value produced where finite values are required."""


class OutputExistsError(SynthgridError):
    """Refusing to overwrite existing outputs without --force."""
