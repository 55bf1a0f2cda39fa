"""Exception types raised by pageopt."""


class PageOptError(Exception):
    """Base class for all pageopt errors."""


class DimensionMismatchError(PageOptError, ValueError):
    """Vectors (or a vector and a problem) disagree on dimension."""


class NonFiniteError(PageOptError, ArithmeticError):
    """A vector operation produced NaN or Inf."""


class InvalidParameterError(PageOptError, ValueError):
    """A tunable is outside its admissible range."""


class ProblemError(PageOptError, ValueError):
    """A problem instance cannot be built (degenerate curvature, bad dataset, ...)."""


class MissingConstantError(PageOptError, ValueError):
    """A certified constant (L, sigma^2, f*) is required but absent."""


class EnumerationTooLargeError(PageOptError, ValueError):
    """The exact outcome tree is too large to enumerate."""
