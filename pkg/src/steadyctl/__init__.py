"""steadyctl: steady states of controlled discrete maps, their basins, and
how to steer between them.

The toolkit finds and continues branches of steady states of a controlled
map ``x_next = f(x, alpha)`` along paths in control space, estimates
domains of attraction through an orbit-summed Lyapunov series, and plans
finite chains of verified control maneuvers that transfer the system
between two stable steady states.
"""

from .maps import (
    ControlledMap,
    ConvergedTo,
    Escaped,
    NearSingularJacobian,
    NoConvergence,
    NonFiniteDerivative,
    Stability,
    SteadyState,
    StepBudget,
    Trajectory,
    classify_stability,
    iterate,
    jacobian_x,
    shift_to_origin,
    solve_steady_state,
)
from .systems import (
    CUBIC_SHIFT,
    LOGISTIC,
    RADIAL_CUBIC_2D,
    available_systems,
    get_system,
    make_polynomial_map,
    register_system,
)
from .continuation import (
    BoundaryCrossing,
    BoundaryRefinementFailed,
    ControlPolyline,
    PathLost,
    PathSample,
    SteadyPath,
    stability_boundary,
    state_at,
    trace_path,
)
from .basin import (
    BasinSlice,
    GridMask,
    Interval,
    LyapunovEvaluation,
    LyapunovStatus,
    MembershipResult,
    NotConverged,
    OrbitEvidence,
    Star,
    TargetNotStable,
    Verdict,
    certify_contraction_ball,
    estimate_grid,
    estimate_interval_1d,
    estimate_star,
    functional_residual,
    in_basin,
    lyapunov_value,
)
from .planner import (
    LegBudgetExceeded,
    LegReport,
    Maneuver,
    ManeuverPlan,
    NoProgress,
    PlanStatus,
    UnstableOnPath,
    VerificationReport,
    check_maneuver,
    plan_along_path,
    plan_from_controls,
    verify_plan,
)

__version__ = "0.1.0"
