"""Closed-loop integration of the damped double integrator.

Two solvers are provided: an embedded Runge-Kutta-Fehlberg 4(5) pair with
step-size control (the default) and a classical fixed-step RK4 kept as a
cross-check. The control input is re-evaluated at every internal stage, so
the closed loop is treated as a continuous ODE, not a sampled controller.

``simulate`` records samples on a regular grid plus the exact initial and
final instants, and locates saturation entry/exit instants by bisection so
saturation timings are measured rather than interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

from .controllers import ControlOutput
from .model import (
    ControlLaw,
    ControllerSpec,
    IntegratorKind,
    Sample,
    SimulationConfig,
    State,
    Trajectory,
)


class IntegrationError(RuntimeError):
    """Base class for solver failures."""


class IntegrationBlowupError(IntegrationError):
    """The state left the finite range during a step."""


class SingularityStallError(IntegrationError):
    """The adaptive step size underflowed the configured floor."""


@dataclass(frozen=True)
class StepResult:
    """Outcome of one accepted integration step.

    ``error_estimate`` is the scaled embedded error norm (0 for the fixed-step
    method, which has no embedded estimate); ``dt_next`` is the safety-factored
    proposal for the following step.
    """

    next_state: State
    dt_used: float
    error_estimate: float
    dt_next: float

    def __post_init__(self) -> None:
        if not self.dt_used > 0:
            raise ValueError("dt_used must be positive")
        if not self.error_estimate >= 0:
            raise ValueError("error_estimate must be >= 0")


RHS = Callable[[float, float], Tuple[float, float]]


def _make_control(spec: ControllerSpec) -> Callable[[float, float], ControlOutput]:
    """Raw/applied control evaluation on plain floats (hot path)."""
    law = spec.law
    k = spec.k
    d = spec.d
    s = spec.saturation
    eps = spec.epsilon_reg
    cap = spec.damping_cap

    def evaluate(x1: float, x2: float) -> ControlOutput:
        if law is ControlLaw.NONE:
            v_raw = -k * x1
        elif law is ControlLaw.LINEAR:
            v_raw = -k * x1 - d * x2
        else:
            ax1 = abs(x1)
            mag = x2 * x2 / (ax1 if ax1 > eps else eps)
            if mag > cap:
                mag = cap
            if x2 > 0.0:
                v_raw = -k * x1 - mag
            elif x2 < 0.0:
                v_raw = -k * x1 + mag
            else:
                v_raw = -k * x1
        if v_raw > s:
            return ControlOutput(s, v_raw, True)
        if v_raw < -s:
            return ControlOutput(-s, v_raw, True)
        return ControlOutput(v_raw, v_raw, False)

    return evaluate


def _make_rhs(spec: ControllerSpec) -> RHS:
    """Closed-loop right-hand side (x2, applied acceleration) on floats."""
    law = spec.law
    k = spec.k
    d = spec.d
    s = spec.saturation
    eps = spec.epsilon_reg
    cap = spec.damping_cap

    def rhs(x1: float, x2: float) -> Tuple[float, float]:
        if law is ControlLaw.NONE:
            v = -k * x1
        elif law is ControlLaw.LINEAR:
            v = -k * x1 - d * x2
        else:
            ax1 = abs(x1)
            mag = x2 * x2 / (ax1 if ax1 > eps else eps)
            if mag > cap:
                mag = cap
            if x2 > 0.0:
                v = -k * x1 - mag
            elif x2 < 0.0:
                v = -k * x1 + mag
            else:
                v = -k * x1
        if v > s:
            v = s
        elif v < -s:
            v = -s
        return x2, v

    return rhs


def derivative(state: State, spec: ControllerSpec) -> Tuple[float, float]:
    """State derivative (x2, applied acceleration) of the closed loop.

    In saturated mode the second component equals the signed amplitude limit
    exactly.
    """
    _, v = _make_rhs(spec)(state.x1, state.x2)
    return state.x2, v


# Fehlberg 4(5) tableau: six stages, 4th-order solution with a 5th-order
# companion; the 5th-order solution is propagated (local extrapolation) and
# the difference of the two provides the error estimate.
_B21 = 1.0 / 4.0
_B31, _B32 = 3.0 / 32.0, 9.0 / 32.0
_B41, _B42, _B43 = 1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0
_B51, _B52, _B53, _B54 = 439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0
_B61, _B62, _B63, _B64, _B65 = -8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0
_C41, _C43, _C44, _C45 = 25.0 / 216.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0
_C51, _C53, _C54, _C55, _C56 = (
    16.0 / 135.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
)

_SAFETY = 0.9
_MAX_GROWTH = 5.0
_MIN_SHRINK = 0.1
_ORDER_EXPONENT = 0.2  # the pair controls the 4th-order error, ~h^5


def _rk45_pair(rhs: RHS, x1: float, x2: float, h: float) -> Tuple[float, float, float, float]:
    """One Fehlberg step: returns (x1_5th, x2_5th, err_x1, err_x2)."""
    a1, b1 = rhs(x1, x2)
    a2, b2 = rhs(x1 + h * _B21 * a1, x2 + h * _B21 * b1)
    a3, b3 = rhs(x1 + h * (_B31 * a1 + _B32 * a2), x2 + h * (_B31 * b1 + _B32 * b2))
    a4, b4 = rhs(
        x1 + h * (_B41 * a1 + _B42 * a2 + _B43 * a3),
        x2 + h * (_B41 * b1 + _B42 * b2 + _B43 * b3),
    )
    a5, b5 = rhs(
        x1 + h * (_B51 * a1 + _B52 * a2 + _B53 * a3 + _B54 * a4),
        x2 + h * (_B51 * b1 + _B52 * b2 + _B53 * b3 + _B54 * b4),
    )
    a6, b6 = rhs(
        x1 + h * (_B61 * a1 + _B62 * a2 + _B63 * a3 + _B64 * a4 + _B65 * a5),
        x2 + h * (_B61 * b1 + _B62 * b2 + _B63 * b3 + _B64 * b4 + _B65 * b5),
    )
    x1_4 = x1 + h * (_C41 * a1 + _C43 * a3 + _C44 * a4 + _C45 * a5)
    x2_4 = x2 + h * (_C41 * b1 + _C43 * b3 + _C44 * b4 + _C45 * b5)
    x1_5 = x1 + h * (_C51 * a1 + _C53 * a3 + _C54 * a4 + _C55 * a5 + _C56 * a6)
    x2_5 = x2 + h * (_C51 * b1 + _C53 * b3 + _C54 * b4 + _C55 * b5 + _C56 * b6)
    return x1_5, x2_5, x1_5 - x1_4, x2_5 - x2_4


def _rk4_core(rhs: RHS, x1: float, x2: float, h: float) -> Tuple[float, float]:
    """One classical RK4 step on plain floats."""
    a1, b1 = rhs(x1, x2)
    a2, b2 = rhs(x1 + 0.5 * h * a1, x2 + 0.5 * h * b1)
    a3, b3 = rhs(x1 + 0.5 * h * a2, x2 + 0.5 * h * b2)
    a4, b4 = rhs(x1 + h * a3, x2 + h * b3)
    return (
        x1 + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0,
        x2 + h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0,
    )


def _rk45_accept(
    rhs: RHS,
    x1: float,
    x2: float,
    dt_try: float,
    rel_tol: float,
    abs_tol: float,
    min_step: float,
) -> Tuple[float, float, float, float, float]:
    """Shrink until the scaled error norm is <= 1.

    Returns (x1_next, x2_next, dt_used, error_norm, dt_next_proposal).
    """
    h = dt_try
    while True:
        n1, n2, e1, e2 = _rk45_pair(rhs, x1, x2, h)
        if math.isfinite(n1) and math.isfinite(n2):
            s1 = abs_tol + rel_tol * max(abs(x1), abs(n1))
            s2 = abs_tol + rel_tol * max(abs(x2), abs(n2))
            r1 = e1 / s1
            r2 = e2 / s2
            err = math.sqrt(0.5 * (r1 * r1 + r2 * r2))
        else:
            err = math.inf
        if err <= 1.0:
            if err == 0.0:
                factor = _MAX_GROWTH
            else:
                factor = min(_MAX_GROWTH, max(_MIN_SHRINK, _SAFETY * err ** -_ORDER_EXPONENT))
            return n1, n2, h, err, h * factor
        if math.isinf(err) or math.isnan(err):
            shrink = _MIN_SHRINK
        else:
            shrink = max(_MIN_SHRINK, min(0.5, _SAFETY * err ** -_ORDER_EXPONENT))
        h *= shrink
        if h < min_step:
            raise SingularityStallError(
                f"step size underflow ({h!r} < min_step {min_step!r}) "
                f"at state ({x1!r}, {x2!r})"
            )


def step_rk4(state: State, spec: ControllerSpec, dt: float) -> StepResult:
    """One classical 4th-order Runge-Kutta step of exactly ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    n1, n2 = _rk4_core(_make_rhs(spec), state.x1, state.x2, dt)
    if not (math.isfinite(n1) and math.isfinite(n2)):
        raise IntegrationBlowupError(
            f"non-finite state after RK4 step dt={dt!r} from ({state.x1!r}, {state.x2!r})"
        )
    return StepResult(next_state=State(n1, n2), dt_used=dt, error_estimate=0.0, dt_next=dt)


def step_rk45(
    state: State,
    spec: ControllerSpec,
    dt_try: float,
    rel_tol: float,
    abs_tol: float,
    min_step: float = 1e-13,
) -> StepResult:
    """One accepted embedded 4(5) step.

    The attempted size shrinks until the scaled error estimate passes, so
    ``dt_used`` may be smaller than ``dt_try``; ``dt_next`` carries the
    safety-factored proposal. Raises ``SingularityStallError`` if the
    required size falls below ``min_step``.
    """
    if not dt_try > 0:
        raise ValueError(f"dt_try must be positive, got {dt_try!r}")
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    n1, n2, used, err, nxt = _rk45_accept(
        _make_rhs(spec), state.x1, state.x2, dt_try, rel_tol, abs_tol, min_step
    )
    return StepResult(next_state=State(n1, n2), dt_used=used, error_estimate=err, dt_next=nxt)


def simulate_saturated_closed_form(
    x1_0: float, x2_0: float, saturation: float, sign_v: int, t: float
) -> State:
    """Exact state of the saturated loop after time ``t``.

    With the applied acceleration pinned to ``sign_v * saturation`` the
    trajectory is the parabola x1(t) = X1 + X2*t + sign*S*t^2/2,
    x2(t) = X2 + sign*S*t. Used as an oracle for the integrator inside
    saturated episodes.
    """
    if not saturation > 0 or math.isinf(saturation):
        raise ValueError(f"saturation must be positive and finite, got {saturation!r}")
    if sign_v not in (-1, 1):
        raise ValueError(f"sign_v must be +1 or -1, got {sign_v!r}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    a = sign_v * saturation
    return State(x1_0 + x2_0 * t + 0.5 * a * t * t, x2_0 + a * t)


_EVENT_TIME_TOL = 1e-12
_MIN_EVENT_DT = 1e-15


def simulate(spec: ControllerSpec, config: SimulationConfig) -> Trajectory:
    """Integrate the closed loop and return the sampled trajectory.

    Samples are recorded at every multiple of ``sample_interval``, at the
    exact initial and final instants, and at saturation entry/exit instants
    located by bisection on |v_raw| - S to 1e-12 time accuracy. The run ends
    at ``t_end`` or as soon as V drops below ``v_stop``.
    """
    rhs = _make_rhs(spec)
    raw_control = _make_control(spec)
    k = spec.k
    bounded = spec.bounded
    adaptive = config.integrator is IntegratorKind.ADAPTIVE_RK45
    t_end = config.t_end
    interval = config.sample_interval
    v_stop = config.v_stop

    def make_sample(t: float, x1: float, x2: float) -> Sample:
        out = raw_control(x1, x2)
        energy = 0.5 * x2 * x2 + 0.5 * k * x1 * x1
        # Exact zero for the conservative law: v == -k*x1 cancels exactly.
        v_dot = x2 * (k * x1 + out.v)
        return Sample(
            t=t,
            state=State(x1, x2),
            v_raw=out.v_raw,
            v=out.v,
            saturated=out.saturated,
            V=energy,
            V_dot=v_dot,
        )

    samples: List[Sample] = [make_sample(0.0, config.initial.x1, config.initial.x2)]
    t = 0.0
    x1, x2 = config.initial.x1, config.initial.x2
    sat_cur = samples[0].saturated
    boundary_index = 1  # next regular boundary is boundary_index * interval

    if samples[0].V < v_stop:
        return Trajectory(controller=spec, config=config, samples=tuple(samples))

    # First attempted step: one sampling period; the acceptance loop shrinks
    # it as far as the local error demands (rejections are cheap).
    h_prop = interval if adaptive else config.dt

    while t < t_end:
        target = min(t_end, boundary_index * interval)
        dt_max = target - t
        try:
            if adaptive:
                n1, n2, dt_used, _, h_prop = _rk45_accept(
                    rhs, x1, x2, min(h_prop, dt_max),
                    config.rel_tol, config.abs_tol, config.min_step,
                )
            else:
                dt_used = min(h_prop, dt_max)
                n1, n2 = _rk4_core(rhs, x1, x2, dt_used)
                if not (math.isfinite(n1) and math.isfinite(n2)):
                    raise IntegrationBlowupError("non-finite state after RK4 step")
        except IntegrationError as exc:
            raise type(exc)(f"at t={t!r}, state=({x1!r}, {x2!r}): {exc}") from exc

        if bounded:
            sat_new = raw_control(n1, n2).saturated
            if sat_new != sat_cur and dt_used > _MIN_EVENT_DT:
                # Locate the crossing of |v_raw| - S inside (t, t + dt_used).
                lo, hi = 0.0, dt_used
                while hi - lo > _EVENT_TIME_TOL:
                    mid = 0.5 * (lo + hi)
                    m1, m2 = _rk4_core(rhs, x1, x2, mid)
                    if raw_control(m1, m2).saturated == sat_cur:
                        lo = mid
                    else:
                        hi = mid
                if hi > _MIN_EVENT_DT and t + hi > t:
                    e1, e2 = _rk4_core(rhs, x1, x2, hi)
                    if not (math.isfinite(e1) and math.isfinite(e2)):
                        raise IntegrationBlowupError(
                            f"non-finite state at saturation boundary near t={t + hi!r}"
                        )
                    t = t + hi
                    x1, x2 = e1, e2
                    if t > samples[-1].t:
                        samples.append(make_sample(t, x1, x2))
                    sat_cur = samples[-1].saturated
                    if v_stop > 0.0 and samples[-1].V < v_stop:
                        break
                    continue
            sat_cur = sat_new

        t = target if dt_used >= dt_max else t + dt_used
        x1, x2 = n1, n2

        if t == target and t > samples[-1].t:
            samples.append(make_sample(t, x1, x2))
            if target < t_end:
                boundary_index += 1
        if v_stop > 0.0:
            energy = 0.5 * x2 * x2 + 0.5 * k * x1 * x1
            if energy < v_stop:
                if t > samples[-1].t:
                    samples.append(make_sample(t, x1, x2))
                break

    return Trajectory(controller=spec, config=config, samples=tuple(samples))
