"""Exception types shared across the package."""


class SchemaError(ValueError):
    """Input file or config is missing required columns/keys or names unknown ones."""


class EmptyDatasetError(ValueError):
    """A dataset with zero usable rows where at least one row is required."""


class DegenerateDesignError(ValueError):
    """A design matrix that cannot be fit: constant column, bad transform domain."""


class SingularDesignError(DegenerateDesignError):
    """Rank-deficient design matrix.  Carries the offending column labels."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class PipelineStepError(RuntimeError):
    """A fatal failure inside a named pipeline step."""

    def __init__(self, step, message):
        super().__init__(f"{step}: {message}")
        self.step = step
