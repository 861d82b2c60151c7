"""Racing trajectory planning with curvature-integrated contouring control."""

from .errors import (
    CimpccError,
    ConfigurationError,
    DegenerateTrack,
    DimensionMismatch,
    DomainError,
    InvalidFactor,
    InvalidWindow,
    NoCompletedLaps,
    NumericalDegeneracy,
    OffTrack,
    ParseError,
    RaceAborted,
    SolverFailure,
    SteeringSingularity,
)
from .planner import (
    MODE_CIMPCC,
    MODE_MPCC,
    HorizonConfig,
    HorizonPlan,
    Planner,
    PlannerWeights,
    build_nlp,
    contour_lag_errors,
    eval_j_ci,
    eval_j_mpcc,
)
from .track import (
    Centerline,
    CurvatureProfile,
    PoseSample,
    TrackPoint,
    TrackView,
    build_curvature_profile,
    centerline_from_arrays,
    compute_raw_curvature,
    load_centerline,
    normalize_curvature,
    project,
    read_track_csv,
    sample_at_s,
    smooth_curvature,
)
from .vehicle import (
    ControlInput,
    Disturbance,
    VehicleParams,
    VehicleState,
    dynamics,
    plant_step,
    rk4_step,
)
from .velocity import MappingParams, VelocityBounds, derive_velocity_bounds, map_nsc_to_beta

__version__ = "0.1.0"
