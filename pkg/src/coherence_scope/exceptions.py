"""Exception types raised across the package."""


class CoherenceScopeError(Exception):
    """Base class for all package errors."""


class ValidationError(CoherenceScopeError, ValueError):
    """An input violates a structural invariant (trace preservation, positivity, ranges)."""


class CoherenceError(CoherenceScopeError, ValueError):
    """The leading Kraus operator cannot be decomposed (too far from the identity)."""


class SizeLimitError(CoherenceScopeError, ValueError):
    """A dense simulation would exceed the configured size cap."""


class SimulationError(CoherenceScopeError, RuntimeError):
    """Internal consistency check failed during a simulation."""
