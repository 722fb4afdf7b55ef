"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A constructor or operation received an out-of-range argument."""


class ConfigError(ValueError):
    """A run configuration could not be parsed or violates an invariant."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ComparisonError(ValueError):
    """Two simulation results cannot be compared (different scenarios)."""


class UnsupportedScenarioError(ValueError):
    """The analytic oracle was asked about a scenario it does not model."""
