"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class VqrError(Exception):
    exit_code = 1


class ValidationError(VqrError, ValueError):
    exit_code = 2


class SchemaError(ValidationError):
    """A required column is missing from an input file."""


class ParseError(ValidationError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class CapabilityError(VqrError):
    """The requested operation is not available for this input (e.g. sampled grid)."""

    exit_code = 2


class ResourceError(VqrError):
    exit_code = 2


class StateError(VqrError):
    exit_code = 2


class SolverError(VqrError):
    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
