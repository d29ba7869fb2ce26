"""Exception types shared across the package."""


class MicrogridError(Exception):
    """Base class for all package errors."""


class ScenarioError(MicrogridError, ValueError):
    """Malformed or invalid scenario/timeseries input; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class TopologyError(MicrogridError, ValueError):
    """Genome or checkpoint does not match the expected network topology."""
