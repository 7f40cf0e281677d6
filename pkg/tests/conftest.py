"""Shared builders for the test suite."""

from __future__ import annotations

import math
from typing import Iterable, Sequence, Tuple

import pytest

from nldamp import (
    ControlLaw,
    ControllerSpec,
    Sample,
    SimulationConfig,
    State,
    Trajectory,
    control,
    lyapunov,
)


def build_trajectory(
    points: Sequence[Tuple[float, float, float]],
    law: ControlLaw = ControlLaw.NONLINEAR,
    k: float = 100.0,
    d: float = 0.0,
    saturation: float = math.inf,
) -> Trajectory:
    """Trajectory from raw (t, x1, x2) points with honestly derived samples."""
    spec = ControllerSpec(law=law, k=k, d=d, saturation=saturation)
    samples = []
    for t, x1, x2 in points:
        state = State(x1, x2)
        out = control(state, spec)
        samples.append(
            Sample(
                t=t,
                state=state,
                v_raw=out.v_raw,
                v=out.v,
                saturated=out.saturated,
                V=lyapunov(state, k),
                V_dot=x2 * (k * x1 + out.v),
            )
        )
    t_end = max(points[-1][0], 1e-6)
    config = SimulationConfig(
        initial=State(points[0][1], points[0][2]),
        t_end=t_end,
        dt=t_end / 10,
        min_step=t_end / 100,
        sample_interval=t_end,
    )
    return Trajectory(controller=spec, config=config, samples=tuple(samples))
