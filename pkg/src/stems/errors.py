"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A building, graph, or run configuration violates its invariants."""


class InvalidSpec(ConfigError):
    """A scenario specification cannot produce a usable time series."""


class HorizonExceeded(RuntimeError):
    """The environment was stepped past the end of its exogenous series."""


class ShapeError(ValueError):
    """Array dimensions do not match the declared parameter chain."""


class StaleCache(RuntimeError):
    """A cached forward pass no longer matches the parameters it was built with."""


class Infeasible(RuntimeError):
    """The safe-action polytope is empty; an emergency fallback is required."""


class EmptyLogs(ValueError):
    """Metrics were requested for an episode record with no steps."""


class CheckpointMismatch(ValueError):
    """Checkpoint tensor shapes differ from the current configuration."""


class ParseError(ValueError):
    """A CSV cell could not be parsed; carries row/column context."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class SchemaError(ValueError):
    """A CSV header is missing required columns."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"missing required columns: {', '.join(self.missing)}")


class LengthMismatch(ValueError):
    """Per-building column sets or series lengths are inconsistent."""
