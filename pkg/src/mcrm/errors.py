"""Exception types raised by the solver and its helpers."""

import numpy as np


class McrmError(Exception):
    """Base class for all package errors."""


class EvaluationError(McrmError):
    """An objective (or derivative) returned a non-finite value.

    ``index`` is the offending objective, ``point`` the evaluation point
    (for finite differences this is the stencil point, not the base point).
    """

    def __init__(self, message, index=None, point=None):
        super().__init__(message)
        self.index = index
        self.point = None if point is None else np.array(point, dtype=float)


class ConfigurationError(McrmError, ValueError):
    """Inconsistent options, e.g. exact derivatives requested but absent."""


class DegenerateStepError(McrmError):
    """A finite-difference step was requested with ``||x_t - x_{t-1}|| = 0``."""


class SubsolverError(McrmError):
    """The cubic subproblem could not be certified.

    ``best`` holds the best (uncertified) candidate found, if any.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
