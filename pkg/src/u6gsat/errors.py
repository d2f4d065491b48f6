"""Exception types shared across the package."""


class U6gsatError(Exception):
    """Base class for all package errors."""


class DatasetError(U6gsatError):
    """Malformed or unusable polygon dataset."""


class EmptyDatasetError(DatasetError):
    """Dataset contains no usable building polygons."""


class ClutterTableError(U6gsatError):
    """Malformed or unusable clutter-loss table."""


class ConfigValidationError(U6gsatError):
    """Scenario configuration failed validation.

    Carries the full list of problems so a run can report everything
    at once instead of failing one key at a time.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericQualityError(U6gsatError):
    """A numerical quality gate (truncation, monotonization) was exceeded."""
