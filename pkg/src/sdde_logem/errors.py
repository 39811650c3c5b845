"""Exception types shared across the package."""


class SddeError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = dict(details)
        self.node = details.get("node")
        self.time = details.get("time")

    def at_node(self, node, time):
        """Attach the grid location where the error surfaced."""
        self.node = node
        self.time = time
        self.details["node"] = node
        self.details["time"] = time
        return self

    def __str__(self):
        if self.node is not None:
            return f"{self.message} (at node {self.node}, t={self.time:.12g})"
        return self.message


class ConfigurationError(SddeError):
    """Invalid parameters, grids, or config documents."""


class UsageError(SddeError):
    """A call that violates an operation's preconditions."""


class NumericInputError(SddeError):
    """Non-finite numeric input where finite values are required."""


class PositivityBreachError(SddeError):
    """A jump factor 1 + g_ij * z dropped to or below zero."""


class OverflowAbortError(SddeError):
    """A non-finite intermediate appeared; the path is aborted."""


class SequencingError(SddeError):
    """Internal ordering violation: a delayed node was read before it was computed."""


class ValidationUnsupportedError(SddeError):
    """A descriptor family has no closed-form constants to validate against."""


class UnsupportedOracleError(SddeError):
    """The closed-form reference solution does not cover this scenario."""


class AssumptionValidationError(SddeError):
    """Assumption validation failed for an operation that requires it."""

    def __init__(self, message, failures=(), **details):
        super().__init__(message, **details)
        self.failures = list(failures)


class ExperimentAbortError(SddeError):
    """A Monte Carlo experiment was aborted because one path failed."""

    def __init__(self, message, path_index=None, **details):
        super().__init__(message, **details)
        self.path_index = path_index
