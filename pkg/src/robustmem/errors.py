"""Exception types shared across the package."""


class RobustMemError(Exception):
    """Base class for all package errors."""


class ShapeError(RobustMemError, ValueError):
    """Dimension mismatch between a network and its input or another network."""


class InvalidWidthError(RobustMemError, ValueError):
    """Requested width is smaller than a network's width or outside the supported range."""


class ParseError(RobustMemError, ValueError):
    """Malformed serialized network. ``position`` locates the problem."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


class GadgetRangeError(RobustMemError, ValueError):
    """Gadget parameter (epsilon, p, C, ...) outside the supported range."""


class UndefinedSeparationError(RobustMemError, ValueError):
    """Separation is undefined for datasets with a single class."""


class InfeasibleRadiusError(RobustMemError, ValueError):
    """Robustness radius is too large relative to the separation."""


class GenerationError(RobustMemError, RuntimeError):
    """Random instance generation gave up after its retry budget."""


class SearchFailure(RobustMemError, RuntimeError):
    """Randomized projection search exhausted its draws."""

    def __init__(self, message, draws=0, best_margin=None):
        self.draws = draws
        self.best_margin = best_margin
        super().__init__(message)


class CoverFailure(RobustMemError, RuntimeError):
    """Greedy sphere cover did not reach the target radius within the center budget."""

    def __init__(self, message, max_gap=None, n_centers=0):
        self.max_gap = max_gap
        self.n_centers = n_centers
        super().__init__(message)


class AccountingError(RobustMemError, AssertionError):
    """A network's width or depth disagrees with its recorded formula."""
