"""Exceptions shared across the package."""


class AccuracyError(RuntimeError):
    """A numerical routine could not reach its documented accuracy target."""


class ConvergenceError(AccuracyError):
    """An iterative refinement stopped before meeting its tolerance."""


class CrossValidationError(AccuracyError):
    """Two independent construction routes disagree beyond tolerance."""
