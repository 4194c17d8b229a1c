"""Exception types shared across the toolkit.

Value-like misuse derives from ValueError, runtime/budget problems from
RuntimeError, so callers can keep catching the builtin categories.
"""


class ResolutionError(ValueError):
    """Grid too coarse, or results not converged under grid refinement."""


class RegimeError(ValueError):
    """Inputs outside the validity regime of a closed form or sampler."""


class DegenerateDetuningError(ValueError):
    """RF drive equals the comb FSR: the Vernier detuning vanishes and all
    sidebands coincide."""


class FilterClippingError(ValueError):
    """A spectral filter edge cuts into the support of a retained line."""

    def __init__(self, message, clipped_bins=()):
        super().__init__(message)
        self.clipped_bins = tuple(clipped_bins)


class EqualizationError(ValueError):
    """No single modulation index equalizes this many bins; carries the
    best-effort index."""

    def __init__(self, message, best_effort_index):
        super().__init__(message)
        self.best_effort_index = best_effort_index


class AliasingError(ValueError):
    """Conjugate time window too short for the structure it must hold."""


class TruncationError(ValueError):
    """Integral tails not converged within the available support."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ResourceLimitError(RuntimeError):
    """Requested grid exceeds the configured memory cap; carries a workable
    coarser sampling suggestion."""

    def __init__(self, message, suggested_samples=None):
        super().__init__(message)
        self.suggested_samples = suggested_samples


class NoDataError(RuntimeError):
    """Estimator invoked on an empty record."""


class AmbiguousPeakError(ValueError):
    """Several equal-height maxima; carries the candidate delays."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class FitConvergenceError(RuntimeError):
    """Fit budget exhausted without convergence; carries the best point."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(ValueError):
    """Configuration document missing, malformed, or inconsistent."""
