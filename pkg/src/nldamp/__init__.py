"""Set-point control of the double integrator with nonlinear damping.

The package simulates the closed loop x1' = x2, x2' = -k*x1 - D under three
damping choices (none, linear, and the velocity-squared over set-point
distance law), with optional control saturation, and provides the analysis
tools to verify stability, passivity, finite-time convergence, and
saturation-exit behavior numerically.
"""

from .analysis import (
    DEFAULT_SLOPE_BAND,
    FiniteTimeMap,
    GridSpec,
    PassivityClass,
    PassivityMap,
    RegionMask,
    SaturationEpisode,
    analyze,
    attractor_slope,
    classify_passivity,
    convergence_time_bound,
    default_grid,
    finite_time_condition,
    finite_time_region,
    fit_log_decay,
    fit_log_poly,
    lyapunov,
    lyapunov_rate,
    passivity_map,
    saturation_episodes,
    saturation_exit_bound,
)
from .controllers import (
    ControlOutput,
    control,
    critical_gain,
    linear_control,
    nonlinear_control,
    saturate,
)
from .integrator import (
    IntegrationBlowupError,
    IntegrationError,
    SingularityStallError,
    StepResult,
    derivative,
    simulate,
    simulate_saturated_closed_form,
    step_rk4,
    step_rk45,
)
from .model import (
    UNBOUNDED,
    AnalysisReport,
    ControlLaw,
    ControllerSpec,
    DecayFit,
    FitModel,
    IntegratorKind,
    Sample,
    SimulationConfig,
    State,
    Trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "ControlLaw",
    "ControlOutput",
    "ControllerSpec",
    "DEFAULT_SLOPE_BAND",
    "DecayFit",
    "FiniteTimeMap",
    "FitModel",
    "GridSpec",
    "IntegrationBlowupError",
    "IntegrationError",
    "IntegratorKind",
    "PassivityClass",
    "PassivityMap",
    "RegionMask",
    "Sample",
    "SaturationEpisode",
    "SimulationConfig",
    "SingularityStallError",
    "State",
    "StepResult",
    "Trajectory",
    "UNBOUNDED",
    "analyze",
    "attractor_slope",
    "classify_passivity",
    "control",
    "convergence_time_bound",
    "critical_gain",
    "default_grid",
    "derivative",
    "finite_time_condition",
    "finite_time_region",
    "fit_log_decay",
    "fit_log_poly",
    "linear_control",
    "lyapunov",
    "lyapunov_rate",
    "nonlinear_control",
    "passivity_map",
    "saturate",
    "saturation_episodes",
    "saturation_exit_bound",
    "simulate",
    "simulate_saturated_closed_form",
    "step_rk4",
    "step_rk45",
]
