"""Pure control-law evaluations for the double-integrator plant.

Every function here is a stateless map from its arguments; all are reentrant
and thread-safe. The acceleration input produced by ``control`` is what the
integrator applies as the second state derivative.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Tuple

from .model import ControlLaw, ControllerSpec, State


class ControlOutput(NamedTuple):
    v: float
    v_raw: float
    saturated: bool


def _sign(x: float) -> float:
    # sign(0) = 0 so the damping vanishes at x2 = 0.
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def critical_gain(k: float) -> float:
    """Damping coefficient placing a real double pole at -sqrt(k).

    This is the unique d for which s^2 + d*s + k = (s + sqrt(k))^2, i.e. the
    fastest non-oscillatory linear response for the given proportional gain.
    """
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    return 2.0 * math.sqrt(k)


def linear_control(state: State, k: float, d: float) -> float:
    """Proportional plus linear-damping acceleration: -k*x1 - d*x2."""
    return -k * state.x1 - d * state.x2


def nonlinear_damping(x1: float, x2: float, epsilon_reg: float, damping_cap: float) -> float:
    """Damping term x2^2 / |x1| * sign(x2), regularized near the x1 = 0 axis.

    The denominator is floored at ``epsilon_reg`` and the magnitude capped at
    ``damping_cap``; away from the axis and below the cap this is exactly the
    ideal expression.
    """
    magnitude = x2 * x2 / max(abs(x1), epsilon_reg)
    if magnitude > damping_cap:
        magnitude = damping_cap
    return magnitude * _sign(x2)


def nonlinear_control(state: State, spec: ControllerSpec) -> float:
    """Acceleration -k*x1 - D_nl with the regularized nonlinear damping term.

    Always finite: the regularization removes the singularity at x1 = 0.
    """
    d_nl = nonlinear_damping(state.x1, state.x2, spec.epsilon_reg, spec.damping_cap)
    return -spec.k * state.x1 - d_nl


def saturate(v_raw: float, saturation: float) -> Tuple[float, bool]:
    """Clamp ``v_raw`` to [-saturation, +saturation].

    The flag means information was lost, so |v_raw| exactly equal to the
    limit reports ``saturated = False`` (the clamp is the identity there).
    An infinite limit passes the value through unchanged.
    """
    if not saturation > 0:
        raise ValueError(f"saturation must be positive, got {saturation!r}")
    if v_raw > saturation:
        return saturation, True
    if v_raw < -saturation:
        return -saturation, True
    return v_raw, False


def control(state: State, spec: ControllerSpec) -> ControlOutput:
    """Dispatch on the active law and apply the amplitude limit.

    ``ControlLaw.NONE`` keeps the proportional term (-k*x1) with zero
    damping; a zero-input plant is intentionally not provided.
    """
    if spec.law is ControlLaw.NONE:
        v_raw = -spec.k * state.x1
    elif spec.law is ControlLaw.LINEAR:
        v_raw = linear_control(state, spec.k, spec.d)
    else:
        v_raw = nonlinear_control(state, spec)
    v, saturated = saturate(v_raw, spec.saturation)
    return ControlOutput(v=v, v_raw=v_raw, saturated=saturated)
