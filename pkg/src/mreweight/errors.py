"""Exception hierarchy shared by every module."""


class MRError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MRError, ValueError):
    pass


class ParameterError(MRError, ValueError):
    pass


class NumericError(MRError, ArithmeticError):
    pass


class CapabilityError(MRError, NotImplementedError):
    pass


class ConsistencyError(MRError, AssertionError):
    """Two independent computations of the same quantity disagree."""


class DataError(MRError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class SchemaError(DataError):
    pass


class TrainingDiverged(NumericError):
    """A non-finite loss or gradient showed up during training."""

    def __init__(self, message, epoch=None, batch=None):
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.epoch = epoch
        self.batch = batch
