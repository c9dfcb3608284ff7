"""Exception hierarchy shared by every pipeline stage.

Errors raised on bad input derive from :class:`InputError`; errors raised
when a computation breaks down numerically derive from :class:`NumericalError`.
The CLI maps the two families to different exit codes.
"""


class DiiCausalError(Exception):
    """Base class for all package errors."""


class InputError(DiiCausalError, ValueError):
    """Invalid or malformed input."""


class NumericalError(DiiCausalError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""


# --- data ------------------------------------------------------------------


class MalformedInput(InputError):
    pass


class NonFinite(InputError):
    def __init__(self, row, col, message=None):
        self.row, self.col = row, col
        super().__init__(message or f"non-finite value at row {row}, column {col!r}")


class ZeroPrice(InputError):
    def __init__(self, row, col):
        self.row, self.col = row, col
        super().__init__(f"zero price at row {row}, column {col!r}")


class ConstantColumn(InputError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} has zero standard deviation")


class SeriesTooShort(InputError):
    pass


class UnknownVariable(InputError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown variable {name!r}")


# --- neighbours / dii ---------------------------------------------------------


class DimensionMismatch(InputError):
    pass


class TooFewAdmissiblePairs(InputError):
    pass


class MaskMismatch(InputError):
    pass


class InsufficientData(InputError):
    pass


class DegenerateScale(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"non-finite DII at epoch {epoch}")


# --- var / granger ------------------------------------------------------------


class SingularDesign(NumericalError):
    pass


class DegenerateRss(NumericalError):
    pass
