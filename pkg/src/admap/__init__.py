"""Adaptation-map toolkit for a planar quartic spiking model with resets.

The continuous dynamics

    dv/dt = v**4 + a*v - w + I
    dw/dt = eps * (b*v - w)

are cut by the reset v -> vR, w -> gamma*w + d applied at blow-up.  The
package reconstructs the induced one-dimensional adaptation map
Phi(w) = gamma * w_spike(w) + d, classifies its dynamical regime, computes
rotation numbers/intervals of the associated circle map, and predicts
mixed-mode spike signatures.
"""

from .adaptation import (
    OrbitRecord,
    PhiValue,
    SampledAdaptationMap,
    SampledPhi,
    Signature,
    blocks_from_counts,
    cyclic_equal,
    detect_period,
    find_fixed_points,
    iterate_orbit,
    orbit_signature,
    phi,
    phi_derivative,
    raw_phi,
    sample_map,
    solve_phi_fixed_point,
)
from .errors import (
    AdmapError,
    BisectionFailureError,
    ConditionViolatedError,
    DegenerateEquilibriumError,
    EmptyPreimageError,
    FocusTooCloseError,
    HitStableManifoldError,
    InsufficientIntersectionsError,
    InvalidRationalError,
    NoEquilibriaError,
    NotMonotoneError,
    NullclineCrossingError,
    OnStableManifoldError,
    StepSizeUnderflowError,
    TangentialCrossingError,
    TimeBudgetExceededError,
    WidthUnderflowError,
)
from .flow import (
    FlowOptions,
    NonSpiking,
    SpikeEvent,
    Trajectory,
    integrate_to_spike,
    integrate_w_of_v,
    winding_angle,
)
from .manifolds import (
    ManifoldTrace,
    ManifoldTraceOptions,
    ResetLineGeometry,
    build_geometry,
    oscillation_count,
    reset_intersections,
    trace_stable_manifold,
    unstable_limits,
)
from .model import (
    EquilibriumSet,
    ModelParams,
    SaddleEigenData,
    fixed_points,
    nullcline_points,
)
from .rotation import (
    Envelope,
    Lift,
    RegimeLabel,
    RotationResult,
    build_lift,
    classify_regime,
    detect_period2,
    envelopes,
    fixed_point_regime,
    rotation_interval,
    rotation_number,
    signature_from_rho,
)
from .transient import (
    SignatureTarget,
    accessible_counts,
    design_interval,
    verify_target,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
