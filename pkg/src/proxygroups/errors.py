"""Exception hierarchy shared across the toolkit.

Loader errors are deliberately fine-grained: every documented malformation
has its own class so callers (and tests) can distinguish them.
"""


class ProxyGroupsError(Exception):
    """Base class for all toolkit errors."""


class DataFormatError(ProxyGroupsError):
    """A file does not conform to one of the documented formats."""


class MalformedHeaderError(DataFormatError):
    """Header row is missing, misordered, or has unexpected column names."""


class NonFiniteValueError(DataFormatError):
    """A value cell is NaN/Inf or cannot be parsed as a finite number."""


class DuplicateIdError(DataFormatError):
    """The same sample identifier appears more than once."""


class DimensionMismatchError(DataFormatError):
    """A data row has a different number of values than the header declares."""


class EmptyFileError(DataFormatError):
    """The file has no data rows (or no bytes at all)."""


class ValidationError(ProxyGroupsError):
    """A constructed value violates one of its invariants."""


class ParameterError(ProxyGroupsError):
    """An operation was invoked with out-of-domain parameters.

    The message always names the offending parameter first, so command-line
    diagnostics can stay single-line.
    """


class SamplingError(ProxyGroupsError):
    """A sampling request cannot be satisfied (e.g. no clusters to draw from)."""
