"""Construction-time invariants of the domain types."""

import math

import pytest

from nldamp import (
    ControlLaw,
    ControllerSpec,
    DecayFit,
    FitModel,
    Sample,
    SimulationConfig,
    State,
    Trajectory,
)


def test_state_rejects_non_finite():
    with pytest.raises(ValueError):
        State(math.nan, 0.0)
    with pytest.raises(ValueError):
        State(0.0, math.inf)


def test_state_negation():
    s = State(1.5, -2.0)
    assert -s == State(-1.5, 2.0)


def test_controller_spec_rejects_nonpositive_k():
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            ControllerSpec(law=ControlLaw.NONLINEAR, k=bad)


def test_controller_spec_rejects_negative_d():
    with pytest.raises(ValueError):
        ControllerSpec(law=ControlLaw.LINEAR, k=1.0, d=-0.1)


def test_controller_spec_unbounded_saturation_is_valid():
    spec = ControllerSpec(law=ControlLaw.NONLINEAR, k=1.0, saturation=math.inf)
    assert not spec.bounded
    assert ControllerSpec(law=ControlLaw.NONLINEAR, k=1.0, saturation=25.0).bounded


def test_controller_spec_rejects_bad_saturation_and_regularization():
    with pytest.raises(ValueError):
        ControllerSpec(law=ControlLaw.NONLINEAR, k=1.0, saturation=0.0)
    with pytest.raises(ValueError):
        ControllerSpec(law=ControlLaw.NONLINEAR, k=1.0, epsilon_reg=0.0)
    with pytest.raises(ValueError):
        ControllerSpec(law=ControlLaw.NONLINEAR, k=1.0, damping_cap=-1.0)


def test_simulation_config_invariants():
    good = SimulationConfig(initial=State(1.0, 0.0))
    assert good.t_end == 2.0
    with pytest.raises(ValueError):
        SimulationConfig(initial=State(1.0, 0.0), t_end=0.0)
    with pytest.raises(ValueError):
        SimulationConfig(initial=State(1.0, 0.0), dt=3.0)  # dt >= t_end
    with pytest.raises(ValueError):
        SimulationConfig(initial=State(1.0, 0.0), min_step=1.0)  # above dt
    with pytest.raises(ValueError):
        SimulationConfig(initial=State(1.0, 0.0), sample_interval=5.0)
    with pytest.raises(ValueError):
        SimulationConfig(initial=State(1.0, 0.0), v_stop=-1.0)


def test_sample_rejects_negative_energy():
    with pytest.raises(ValueError):
        Sample(t=0.0, state=State(1.0, 0.0), v_raw=0.0, v=0.0, saturated=False,
               V=-1.0, V_dot=0.0)


def _sample(t, x1=1.0):
    return Sample(t=t, state=State(x1, 0.0), v_raw=0.0, v=0.0, saturated=False,
                  V=0.0, V_dot=0.0)


def test_trajectory_requires_increasing_times():
    spec = ControllerSpec(law=ControlLaw.NONE, k=1.0)
    config = SimulationConfig(initial=State(1.0, 0.0))
    with pytest.raises(ValueError):
        Trajectory(controller=spec, config=config,
                   samples=(_sample(0.0), _sample(0.5), _sample(0.5)))
    with pytest.raises(ValueError):
        Trajectory(controller=spec, config=config, samples=(_sample(0.1),))
    with pytest.raises(ValueError):
        Trajectory(controller=spec, config=config, samples=(_sample(0.0, x1=2.0),))
    ok = Trajectory(controller=spec, config=config,
                    samples=(_sample(0.0), _sample(1.0)))
    assert ok.final.t == 1.0


def test_decay_fit_coefficient_count_matches_model():
    DecayFit(model=FitModel.LINEAR, coefficients=(1.0, 2.0), r_squared=0.5)
    DecayFit(model=FitModel.QUADRATIC, coefficients=(1.0, 2.0, 3.0), r_squared=0.5)
    with pytest.raises(ValueError):
        DecayFit(model=FitModel.LINEAR, coefficients=(1.0, 2.0, 3.0), r_squared=0.5)
    with pytest.raises(ValueError):
        DecayFit(model=FitModel.QUADRATIC, coefficients=(1.0, 2.0, 3.0), r_squared=1.5)
