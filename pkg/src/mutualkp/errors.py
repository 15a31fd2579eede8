"""Exception types shared across the package."""


class ParseError(ValueError):
    """A file failed to parse; message carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DegenerateInputError(ValueError):
    """Input geometry carries no usable extent (e.g. all points identical)."""


class IncompatibleCheckpointError(RuntimeError):
    """Checkpoint version/shape does not match what the caller expects."""


class NumericError(RuntimeError):
    """A forward pass or loss produced non-finite values."""


class MetricUndefinedError(ValueError):
    """The metric is undefined for these inputs (e.g. no shared semantic ids)."""
