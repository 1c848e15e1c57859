"""Exception hierarchy shared by every module of the package."""


class GLTSVMError(Exception):
    """Base class for all errors raised by gltsvm."""


class InvalidArgumentError(GLTSVMError, ValueError):
    """An argument violates a documented precondition."""


class SingularMatrixError(GLTSVMError, ValueError):
    """A matrix expected to be symmetric positive definite is not."""


class InvalidDatasetError(GLTSVMError, ValueError):
    """The dataset cannot be used for binary classification."""


class ParseError(GLTSVMError, ValueError):
    """A file could not be parsed.

    ``line`` and ``column`` are 1-based and may be ``None`` when unknown.
    """

    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedVersionError(ParseError):
    """A model file declares a format version this package cannot read."""


class DegenerateModelError(GLTSVMError, ValueError):
    """A trained model cannot produce predictions (zero-norm hyperplane)."""


class DivergenceError(GLTSVMError, ArithmeticError):
    """The fixed-point iteration produced a non-finite iterate."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
