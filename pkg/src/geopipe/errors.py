"""Exception types shared across the package."""


class GeopipeError(Exception):
    """Base class for all package errors."""


class InvalidMeasurementError(GeopipeError):
    """A link measurement violates its invariants (non-positive field, etc.)."""


class InvalidBenchmarkError(GeopipeError):
    """A compute benchmark list is empty or contains non-positive times."""


class IncompleteTopologyError(GeopipeError):
    """The link matrix is missing pairs or contains duplicates."""

    def __init__(self, message, missing=(), duplicates=()):
        super().__init__(message)
        self.missing = list(missing)
        self.duplicates = list(duplicates)


class EmptyClusterError(GeopipeError):
    """Grouping was asked to run on a topology with no devices."""


class InvalidPairError(GeopipeError):
    """A cross-group metric was requested for overlapping groups."""


class DegenerateGroupError(GeopipeError):
    """A device group has zero aggregate compute capacity."""


class InvalidTopologyError(GeopipeError):
    """A link carries zero bandwidth or is otherwise unusable."""


class InfeasibleSplitError(GeopipeError):
    """More pipeline stages than model layers."""


class NoFeasiblePlanError(GeopipeError):
    """Every (batch, micro-batch) combination was infeasible."""


class FactorizationError(GeopipeError):
    """Device capacity ratios do not admit a rank-1 grid factorization."""


class InvalidTimingError(GeopipeError):
    """Timing vectors are inconsistent with the plan's stage count."""


class SchedulingBugError(GeopipeError):
    """The event loop deadlocked with work remaining; carries a state dump."""

    def __init__(self, message, state_dump=None):
        super().__init__(message)
        self.state_dump = state_dump or {}


class InputFileError(GeopipeError):
    """A structured input file failed validation; names the offending field."""
