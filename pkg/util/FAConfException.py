from typing import Optional, Sequence


class FAConfException(Exception):
    """Root of every error raised by the decoder pipeline."""
    pass


class ShapeException(FAConfException):
    """
    Dimension mismatch between tensors or against a configuration.

    Attributes:
        shapes: The offending shapes, in the order they were checked.
    """

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            message = f"{message} (shapes: {', '.join(str(tuple(s)) for s in shapes)})"
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]


class ConfigException(FAConfException):
    pass


class UsageException(ConfigException):
    """Bad command-line flag or config-file key; the CLI exits with code 2."""
    pass


class DomainException(FAConfException):
    """Input outside the mathematical domain of an operation (log of <= 0, frequency beyond Nyquist)."""
    pass


class DesignException(FAConfException):
    """
    A requested filter cannot be realized.

    Attributes:
        constraint: Short name of the violated constraint.
    """

    def __init__(self, constraint: str, message: str):
        super().__init__(f"Filter design failed [{constraint}]: {message}")
        self.constraint = constraint


class FormatException(FAConfException):
    """
    Malformed container or CSV input.

    Attributes:
        check: Name of the failed check (magic, version, payload, row, ...).
        row: 1-based row number when known.
        column: 1-based column number when known.
    """

    def __init__(self, check: str, message: str, row: Optional[int] = None, column: Optional[int] = None):
        where = ""
        if row is not None:
            where = f" at row {row}" + (f", column {column}" if column is not None else "")
        super().__init__(f"Format error [{check}]{where}: {message}")
        self.check = check
        self.row = row
        self.column = column


class DataException(FAConfException):
    pass


class MetricException(FAConfException):
    """A metric is undefined for the given confusion matrix."""
    pass


class LabelIndexException(FAConfException, IndexError):
    pass


class TrainingAbortedException(FAConfException):
    """
    Training hit a non-finite value and was stopped.
    Carries where it happened the way the scheduler errors carry the agent name.
    """

    def __init__(self, message: str, parameter: Optional[str] = None,
                 epoch: Optional[int] = None, batch: Optional[int] = None,
                 original_exception: Optional[BaseException] = None):
        context = []
        if parameter is not None:
            context.append(f"parameter={parameter}")
        if epoch is not None:
            context.append(f"epoch={epoch}")
        if batch is not None:
            context.append(f"batch={batch}")
        suffix = f" ({', '.join(context)})" if context else ""
        super().__init__(f"Training aborted: {message}{suffix}")
        self.parameter = parameter
        self.epoch = epoch
        self.batch = batch
        self.original_exception = original_exception
