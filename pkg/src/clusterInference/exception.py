"""Errors raised by the package. All derive from ValueError."""


class ConfigurationError(ValueError):
    """Invalid population spec, design, or config key."""


class DegenerateSampleError(ValueError):
    """A sample with an empty treatment arm."""


class SingularDesignError(ValueError):
    """No within-cluster variation in the treatment for the fixed-effects fit."""


class UndefinedDiagnosticError(ValueError):
    """A correlation diagnostic on a vector with zero variance."""


class OracleSizeError(ValueError):
    """The enumeration support is too large (or continuous)."""

    def __init__(self, message: str, size_report: dict):
        super().__init__(f"{message}: {size_report}")
        self.size_report = size_report


class DataValidationError(ValueError):
    """Malformed analysis input."""

    def __init__(self, message: str, row: int | None = None):
        text = message if row is None else f"{message} (row {row})"
        super().__init__(text)
        self.row = row
