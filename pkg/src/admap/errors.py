"""Exception types shared across the package."""


class AdmapError(Exception):
    """Base class for all package errors."""


class NoEquilibriaError(AdmapError):
    """The subthreshold vector field is not in the two-fixed-point regime."""


class DegenerateEquilibriumError(AdmapError):
    """An equilibrium sits on (or numerically too close to) a fold boundary."""


class NullclineCrossingError(AdmapError):
    """v-parameterized integration hit the v-nullcline (denominator too small)."""


class StepSizeUnderflowError(AdmapError):
    """The adaptive integrator stalled."""


class TimeBudgetExceededError(AdmapError):
    """Integration exceeded its time budget."""


class FocusTooCloseError(AdmapError):
    """A trajectory sample fell inside the exclusion radius around the focus."""


class NoSpiralTerminationWarning(UserWarning):
    """Manifold trace hit the arc-length cap before reaching the focus."""


class TangentialCrossingError(AdmapError):
    """A reset-line crossing of the manifold is tangential (|dv/dt| ~ 0)."""


class OnStableManifoldError(AdmapError):
    """The queried w coincides with a stable-manifold intersection."""


class HitStableManifoldError(AdmapError):
    """Orbit iteration landed on a stable-manifold intersection."""

    def __init__(self, step, w):
        super().__init__(f"iterate {step} landed on the stable manifold (w={w})")
        self.step = step
        self.w = w


class ConditionViolatedError(AdmapError):
    """A structural condition required to build the lift does not hold."""

    def __init__(self, condition, witnesses):
        super().__init__(f"condition {condition} violated: {witnesses}")
        self.condition = condition
        self.witnesses = witnesses


class NotMonotoneError(AdmapError):
    """The lift is not non-decreasing; use rotation_interval instead."""


class BisectionFailureError(AdmapError):
    """Root bracketing or bisection failed."""


class InvalidRationalError(AdmapError):
    """p/q is not a valid reduced rotation number for signature construction."""


class EmptyPreimageError(AdmapError):
    """A preimage step in the transient designer came back empty."""


class WidthUnderflowError(AdmapError):
    """Designed interval narrower than the width floor."""

    def __init__(self, achieved_prefix):
        super().__init__(
            f"interval width underflow after matching {achieved_prefix} target entries"
        )
        self.achieved_prefix = achieved_prefix


class InsufficientIntersectionsError(AdmapError):
    """Fewer than two stable-manifold intersections inside [beta, alpha]."""
