"""Domain types shared by the simulation, analysis, and CLI layers.

All types are plain immutable values: construct once, share freely between
threads. Invariants are enforced at construction time so downstream code can
rely on them without re-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

#: Sentinel for an unlimited control amplitude.
UNBOUNDED = math.inf


class ControlLaw(Enum):
    """Which damping term closes the loop.

    NONE keeps the proportional term only (a conservative oscillator);
    LINEAR adds -d*x2; NONLINEAR adds the velocity-squared over distance term.
    """

    NONE = "none"
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class IntegratorKind(Enum):
    ADAPTIVE_RK45 = "rk45"
    FIXED_RK4 = "rk4"


class FitModel(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class State:
    """A point of the second-order plant: controlled output and its derivative."""

    x1: float
    x2: float

    def __post_init__(self) -> None:
        _require_finite("x1", self.x1)
        _require_finite("x2", self.x2)

    def __neg__(self) -> "State":
        return State(-self.x1, -self.x2)


@dataclass(frozen=True)
class ControllerSpec:
    """Control-law selection and its parameters.

    ``epsilon_reg`` floors ``|x1|`` in the nonlinear damping denominator and
    ``damping_cap`` bounds the damping magnitude, so the closed-loop vector
    field stays finite on the ``x1 = 0`` axis. Both live here rather than in
    the solver settings because they modify the control law itself; the
    defaults keep the regularized law indistinguishable from the ideal one
    along trajectories that do not touch the axis.
    """

    law: ControlLaw
    k: float
    d: float = 0.0
    saturation: float = UNBOUNDED
    epsilon_reg: float = 1e-12
    damping_cap: float = 1e9

    def __post_init__(self) -> None:
        if not isinstance(self.law, ControlLaw):
            raise TypeError(f"law must be a ControlLaw, got {self.law!r}")
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be a positive finite number, got {self.k!r}")
        if not (self.d >= 0 and math.isfinite(self.d)):
            raise ValueError(f"d must be finite and >= 0, got {self.d!r}")
        if not self.saturation > 0:
            raise ValueError(f"saturation must be > 0 (or math.inf), got {self.saturation!r}")
        if not (self.epsilon_reg > 0 and math.isfinite(self.epsilon_reg)):
            raise ValueError(f"epsilon_reg must be positive, got {self.epsilon_reg!r}")
        if not (self.damping_cap > 0 and math.isfinite(self.damping_cap)):
            raise ValueError(f"damping_cap must be positive, got {self.damping_cap!r}")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.saturation)


@dataclass(frozen=True)
class SimulationConfig:
    """Initial state, horizon, solver selection, and sampling settings.

    ``v_stop`` terminates a run early once the energy ``V`` drops below it
    (0 disables); this keeps integrations from grinding at numerical-noise
    level near the origin. ``sample_interval`` is the output sampling period;
    the exact initial and final instants, and saturation boundary instants,
    are always recorded as well.
    """

    initial: State
    t_end: float = 2.0
    integrator: IntegratorKind = IntegratorKind.ADAPTIVE_RK45
    dt: float = 1e-5
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    min_step: float = 1e-13
    v_stop: float = 1e-20
    sample_interval: float = 1e-3

    def __post_init__(self) -> None:
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive and finite, got {self.t_end!r}")
        if not isinstance(self.integrator, IntegratorKind):
            raise TypeError(f"integrator must be an IntegratorKind, got {self.integrator!r}")
        if not (0 < self.dt < self.t_end):
            raise ValueError(f"dt must satisfy 0 < dt < t_end, got dt={self.dt!r}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol!r}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol!r}")
        if not (0 < self.min_step <= self.dt):
            raise ValueError(f"min_step must satisfy 0 < min_step <= dt, got {self.min_step!r}")
        if not self.v_stop >= 0:
            raise ValueError(f"v_stop must be >= 0, got {self.v_stop!r}")
        if not (0 < self.sample_interval <= self.t_end):
            raise ValueError(
                f"sample_interval must satisfy 0 < interval <= t_end, got {self.sample_interval!r}"
            )


@dataclass(frozen=True)
class Sample:
    """One recorded instant of a trajectory.

    ``v_raw`` is the unclamped control, ``v`` the applied (possibly clamped)
    one; ``saturated`` means information was lost (|v_raw| strictly above the
    limit). ``V`` is the quadratic energy and ``V_dot`` its time derivative
    along the active closed loop, both evaluated at the sampled state.
    """

    t: float
    state: State
    v_raw: float
    v: float
    saturated: bool
    V: float
    V_dot: float

    def __post_init__(self) -> None:
        _require_finite("t", self.t)
        _require_finite("v_raw", self.v_raw)
        _require_finite("v", self.v)
        _require_finite("V", self.V)
        _require_finite("V_dot", self.V_dot)
        if self.V < 0:
            raise ValueError(f"V must be nonnegative, got {self.V!r}")


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of one closed-loop run."""

    controller: ControllerSpec
    config: SimulationConfig
    samples: Tuple[Sample, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("trajectory must contain at least one sample")
        first = self.samples[0]
        if first.t != 0.0:
            raise ValueError(f"first sample must be at t=0, got t={first.t!r}")
        if (first.state.x1, first.state.x2) != (self.config.initial.x1, self.config.initial.x2):
            raise ValueError("first sample state must equal config.initial")
        for a, b in zip(self.samples, self.samples[1:]):
            if not b.t > a.t:
                raise ValueError(f"sample times must strictly increase ({a.t!r} -> {b.t!r})")

    @property
    def final(self) -> Sample:
        return self.samples[-1]

    def times(self) -> Tuple[float, ...]:
        return tuple(s.t for s in self.samples)


@dataclass(frozen=True)
class DecayFit:
    """Polynomial fit of log10|x1| against t over a window.

    ``coefficients`` follow the numpy.polyfit convention (highest degree
    first), so the last entry is the intercept and, for a degree-1 fit,
    ``coefficients[0]`` is the slope. ``r_squared`` is computed over the fit
    window only.
    """

    model: FitModel
    coefficients: Tuple[float, ...]
    r_squared: float

    def __post_init__(self) -> None:
        degree = 1 if self.model is FitModel.LINEAR else 2
        if len(self.coefficients) != degree + 1:
            raise ValueError(
                f"{self.model.value} fit needs {degree + 1} coefficients, "
                f"got {len(self.coefficients)}"
            )
        if not (0.0 <= self.r_squared <= 1.0):
            raise ValueError(f"r_squared must lie in [0, 1], got {self.r_squared!r}")


@dataclass(frozen=True)
class AnalysisReport:
    """Derived trajectory metrics.

    ``settling_time`` is None when the output never settles below the
    threshold; ``attractor_slope_error`` is None when no samples fall in the
    measurement band; ``saturation_exit_time`` is None when the run never
    saturates. ``decay_fit`` is None when no usable constant-sign window
    exists.
    """

    overshoot_count: int
    settling_time: Optional[float]
    final_V: float
    decay_fit: Optional[DecayFit]
    attractor_slope_error: Optional[float]
    saturation_exit_time: Optional[float]

    def __post_init__(self) -> None:
        if self.overshoot_count < 0:
            raise ValueError("overshoot_count must be >= 0")
        if self.final_V < 0:
            raise ValueError("final_V must be >= 0")
