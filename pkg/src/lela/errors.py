"""Exception types shared across the package.

Parameter errors map to CLI exit code 2, degenerate inputs to exit code 3.
"""


class LelaError(Exception):
    """Base class for all package errors."""


class ParameterError(LelaError):
    """A caller-supplied parameter is out of range or inconsistent."""


class DegenerateInputError(LelaError):
    """The input data itself makes the requested operation undefined."""
