"""Exception hierarchy shared by every module."""


class SeqAuditError(Exception):
    """Base class for all package errors."""


class ConfigError(SeqAuditError, ValueError):
    """Invalid test, stream or simulation configuration."""


class ParameterError(ConfigError):
    """A distribution parameter is outside its feasible region."""


class StreamDataError(SeqAuditError, ValueError):
    """An outcome value is malformed or outside [-1, 1].

    ``row`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class InvariantError(SeqAuditError, RuntimeError):
    """An internal invariant was violated (a bug, not bad input)."""


class ProjectionError(SeqAuditError, RuntimeError):
    """The norm-weighted l1-ball projection failed to converge."""

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition number estimate {condition:.3e})"
        super().__init__(message)


class ReplicationError(SeqAuditError, RuntimeError):
    """A replication failed; ``replications`` names the affected batch."""

    def __init__(self, message, replications=None):
        self.replications = replications
        super().__init__(message)
