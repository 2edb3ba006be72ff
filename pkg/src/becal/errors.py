"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, data errors 2,
numeric-domain errors 3.
"""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class UsageError(ToolkitError):
    """Command-line misuse: unknown option, bad flag combination, malformed spec string."""


class DataError(ToolkitError):
    """Input data violates the schema or a dataset-level precondition."""


class DomainError(ToolkitError):
    """A numeric argument lies outside its mathematical domain."""
