"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
1 usage, 2 data, 3 numerical.
"""

from __future__ import annotations


class IrfkitError(Exception):
    exit_code = 1


class SpecError(IrfkitError, ValueError):
    """Invalid parameterization (non-stationary DGP, bad estimator options)."""


class ParameterError(IrfkitError, ValueError):
    """An argument outside its admissible domain."""


class DataError(IrfkitError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class IngestionError(DataError):
    pass


class StructuralError(DataError):
    pass


class InsufficientSampleError(DataError):
    pass


class DataMissingError(DataError):
    pass


class NumericalError(IrfkitError, ArithmeticError):
    exit_code = 3


class SingularityError(NumericalError):
    def __init__(self, message: str, dependent: tuple[str, ...] = ()):
        super().__init__(message)
        self.dependent = dependent


class WeakInstrumentError(NumericalError):
    pass


class DegenerateSeriesError(NumericalError):
    pass


class DecompositionError(NumericalError):
    pass
