"""Exception hierarchy; the CLI maps these onto exit codes."""


class FgsError(Exception):
    """Base class for all package errors."""


class DataError(FgsError, ValueError):
    """Bad input data: missing files/columns, non-numeric cells, invalid shapes."""


class NumericalError(FgsError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class SingularDesignError(NumericalError):
    """The local weighted design matrix is singular at the requested (x, h)."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
