"""Solver correctness against closed-form oracles and event timing."""

import math

import numpy as np
import pytest

from nldamp import (
    ControlLaw,
    ControllerSpec,
    IntegrationBlowupError,
    IntegratorKind,
    SimulationConfig,
    SingularityStallError,
    State,
    derivative,
    saturation_episodes,
    simulate,
    simulate_saturated_closed_form,
    step_rk4,
    step_rk45,
)


def nl_spec(k=100.0, saturation=math.inf, **kwargs):
    return ControllerSpec(law=ControlLaw.NONLINEAR, k=k, saturation=saturation, **kwargs)


def critical_closed_form(t, k, x1_0, x2_0):
    """x1(t) of the critically damped loop (double pole at -sqrt(k))."""
    lam = math.sqrt(k)
    return (x1_0 + (x2_0 + lam * x1_0) * t) * math.exp(-lam * t)


class TestDerivative:
    def test_harmonic_turning_point(self):
        spec = ControllerSpec(law=ControlLaw.NONE, k=1.0)
        assert derivative(State(1.0, 0.0), spec) == (0.0, -1.0)

    def test_nullcline_freezes_velocity(self):
        assert derivative(State(1.0, -10.0), nl_spec()) == (-10.0, 0.0)

    def test_clamped_acceleration_is_exact_limit(self):
        spec = nl_spec(k=200.0, saturation=25.0)
        assert derivative(State(1.0, 0.0), spec) == (0.0, -25.0)


class TestStepRK4:
    def test_harmonic_single_step(self):
        spec = ControllerSpec(law=ControlLaw.NONE, k=1.0)
        result = step_rk4(State(1.0, 0.0), spec, 1e-3)
        assert abs(result.next_state.x1 - math.cos(1e-3)) <= 1e-12
        assert result.error_estimate == 0.0
        assert result.dt_used == 1e-3

    def test_equilibrium_is_fixed_point(self):
        result = step_rk4(State(0.0, 0.0), nl_spec(), 0.1)
        assert result.next_state == State(0.0, 0.0)

    def test_critical_damping_single_step(self):
        spec = ControllerSpec(law=ControlLaw.LINEAR, k=100.0, d=20.0)
        result = step_rk4(State(1.0, 0.0), spec, 1e-4)
        assert abs(result.next_state.x1 - critical_closed_form(1e-4, 100.0, 1.0, 0.0)) <= 1e-12

    def test_blowup_raises(self):
        spec = ControllerSpec(law=ControlLaw.LINEAR, k=1e300, d=0.0)
        with pytest.raises(IntegrationBlowupError):
            step_rk4(State(1.0, 0.0), spec, 1e-3)


class TestStepRK45:
    def test_harmonic_full_period(self):
        spec = ControllerSpec(law=ControlLaw.NONE, k=1.0)
        period = 2.0 * math.pi
        rel_tol = 1e-9
        t, state, h = 0.0, State(1.0, 0.0), 0.1
        while t < period:
            remaining = period - t
            result = step_rk45(state, spec, min(h, remaining), rel_tol, 1e-12)
            t = period if result.dt_used >= remaining else t + result.dt_used
            state = result.next_state
            h = result.dt_next
        assert abs(state.x1 - 1.0) <= 10 * rel_tol
        assert abs(state.x2) <= 10 * rel_tol

    def test_equilibrium_accepted_immediately(self):
        result = step_rk45(State(0.0, 0.0), nl_spec(), 0.5, 1e-9, 1e-12)
        assert result.error_estimate == 0.0
        assert result.dt_used == 0.5

    def test_no_output_crossing_from_unit_start(self):
        # Near-vanishing abs_tol keeps x1 relatively accurate down to the
        # deep tail (1e-87 by t=2), and a near-vanishing regularization floor
        # keeps the 1/|x1| braking exact there; with the default floor the
        # braking saturates below |x1| ~ 1e-12 and the output may legitimately
        # wander across zero at that scale.
        spec = nl_spec(k=100.0, epsilon_reg=1e-300)
        t, state, h = 0.0, State(1.0, 0.0), 1e-3
        while t < 2.0:
            remaining = 2.0 - t
            result = step_rk45(state, spec, min(h, remaining), 1e-9, 1e-300)
            t = 2.0 if result.dt_used >= remaining else t + result.dt_used
            state = result.next_state
            h = result.dt_next
            assert state.x1 > 0.0

    def test_stall_when_regularization_disabled(self):
        # A vanishing floor recreates the axis singularity; the step-size
        # controller must hit the floor instead of looping forever.
        spec = nl_spec(epsilon_reg=1e-300, damping_cap=1e300)
        with pytest.raises(SingularityStallError):
            step_rk45(State(0.0, 1.0), spec, 1e-3, 1e-9, 1e-12, min_step=1e-6)


class TestSaturatedClosedForm:
    def test_negative_branch(self):
        state = simulate_saturated_closed_form(1.0, 0.0, 25.0, -1, 0.2)
        assert state == State(0.5, -5.0)

    def test_identity_at_zero(self):
        assert simulate_saturated_closed_form(0.3, -2.0, 25.0, 1, 0.0) == State(0.3, -2.0)

    def test_positive_branch(self):
        assert simulate_saturated_closed_form(0.0, 0.0, 25.0, 1, 1.0) == State(12.5, 25.0)

    def test_initial_velocity_drift(self):
        # x1 carries the X2*t term: from (0, -10) with +S the output first
        # falls before the parabola turns it around.
        state = simulate_saturated_closed_form(0.0, -10.0, 25.0, 1, 0.2)
        assert state == State(-10.0 * 0.2 + 12.5 * 0.04, -5.0)


class TestSimulate:
    def test_conservative_half_period(self):
        spec = ControllerSpec(law=ControlLaw.NONE, k=1.0)
        config = SimulationConfig(
            initial=State(1.0, 0.0), t_end=math.pi, rel_tol=1e-10, abs_tol=1e-12,
            v_stop=0.0, sample_interval=math.pi / 200,
        )
        trajectory = simulate(spec, config)
        assert abs(trajectory.final.state.x1 + 1.0) <= 1e-8

    def test_conservative_energy_drift(self):
        spec = ControllerSpec(law=ControlLaw.NONE, k=1.0)
        config = SimulationConfig(
            initial=State(1.0, 0.0), t_end=10.0, rel_tol=1e-12, abs_tol=1e-12,
            v_stop=0.0, sample_interval=1e-2,
        )
        trajectory = simulate(spec, config)
        v0 = trajectory.samples[0].V
        drift = max(abs(s.V - v0) for s in trajectory.samples) / v0
        assert drift <= 1e-9

    def test_critical_damping_uniform_match(self):
        spec = ControllerSpec(law=ControlLaw.LINEAR, k=100.0, d=20.0)
        config = SimulationConfig(initial=State(1.0, 0.0), t_end=2.0, v_stop=0.0)
        trajectory = simulate(spec, config)
        worst = max(
            abs(s.state.x1 - critical_closed_form(s.t, 100.0, 1.0, 0.0))
            for s in trajectory.samples
        )
        assert worst <= 1e-8
        assert len(trajectory.samples) == 2001

    def test_nonlinear_monotone_energy(self):
        trajectory = simulate(nl_spec(), SimulationConfig(initial=State(1.0, 0.0)))
        for a, b in zip(trajectory.samples, trajectory.samples[1:]):
            assert b.V <= a.V + 1e-9
            if a.state.x2 != 0.0 and b.state.x2 != 0.0:
                assert b.V < a.V
        assert all(s.state.x1 > 0 for s in trajectory.samples)

    def test_rk4_cross_check_short_horizon(self):
        spec = nl_spec()
        adaptive = simulate(spec, SimulationConfig(initial=State(1.0, 0.0), t_end=0.2,
                                                   v_stop=0.0, sample_interval=1e-3))
        fixed = simulate(spec, SimulationConfig(initial=State(1.0, 0.0), t_end=0.2,
                                                integrator=IntegratorKind.FIXED_RK4,
                                                dt=1e-4, min_step=1e-13,
                                                v_stop=0.0, sample_interval=1e-3))
        assert len(adaptive.samples) == len(fixed.samples)
        for a, b in zip(adaptive.samples, fixed.samples):
            assert a.t == b.t
            assert abs(a.state.x1 - b.state.x1) <= 1e-8
            assert abs(a.state.x2 - b.state.x2) <= 1e-8

    def test_early_stop_on_energy_floor(self):
        trajectory = simulate(nl_spec(), SimulationConfig(initial=State(1.0, 0.0),
                                                          v_stop=1e-20))
        assert trajectory.final.t < 2.0
        assert trajectory.final.V < 1e-20
        assert trajectory.samples[-2].V >= 1e-20

    def test_on_axis_start_integrates(self):
        # The capped braking term makes the field finite on x1 = 0.
        trajectory = simulate(nl_spec(), SimulationConfig(initial=State(0.0, 1.0)))
        assert trajectory.final.t <= 2.0
        assert all(math.isfinite(s.state.x1) and math.isfinite(s.state.x2)
                   for s in trajectory.samples)

    def test_blowup_names_time(self):
        spec = ControllerSpec(law=ControlLaw.LINEAR, k=1e300, d=0.0)
        config = SimulationConfig(initial=State(1.0, 0.0), t_end=1.0,
                                  integrator=IntegratorKind.FIXED_RK4, dt=1e-3,
                                  min_step=1e-12, sample_interval=0.1)
        with pytest.raises(IntegrationBlowupError, match="at t="):
            simulate(spec, config)

    def test_stall_names_time(self):
        spec = nl_spec(epsilon_reg=1e-300, damping_cap=1e300)
        config = SimulationConfig(initial=State(0.0, 1.0), t_end=1.0,
                                  dt=1e-3, min_step=1e-6, sample_interval=0.1)
        with pytest.raises(SingularityStallError, match="at t="):
            simulate(spec, config)


class TestSaturationEvents:
    def test_first_exit_matches_analytic_root(self):
        # During the initial full-braking phase from (1, 0) the raw control is
        # -k*w + 50*(1-w)/w with w = x1; the exit solves k*w^2 + 25*w - 50 = 0.
        k = 200.0
        spec = nl_spec(k=k, saturation=25.0)
        trajectory = simulate(spec, SimulationConfig(initial=State(1.0, 0.0)))
        episodes = saturation_episodes(trajectory)
        assert episodes and episodes[0].start_time == 0.0
        w_exit = (-25.0 + math.sqrt(625.0 + 200.0 * k)) / (2.0 * k)
        t_exit = math.sqrt((1.0 - w_exit) / 12.5)
        assert episodes[0].end_time == pytest.approx(t_exit, abs=1e-9)

    def test_boundary_sample_sits_on_limit(self):
        spec = nl_spec(k=200.0, saturation=25.0)
        trajectory = simulate(spec, SimulationConfig(initial=State(1.0, 0.0)))
        episodes = saturation_episodes(trajectory)
        exit_samples = [s for s in trajectory.samples
                        if any(e.end_time == s.t for e in episodes)]
        assert exit_samples
        for sample in exit_samples:
            assert abs(abs(sample.v_raw) - 25.0) <= 1e-6

    @pytest.mark.parametrize("k", [50.0, 100.0, 150.0, 200.0])
    def test_saturated_segments_match_closed_form(self, k):
        spec = nl_spec(k=k, saturation=25.0)
        trajectory = simulate(spec, SimulationConfig(initial=State(1.0, 0.0)))
        episodes = saturation_episodes(trajectory)
        assert episodes
        for episode in episodes:
            assert episode.end_time is not None
            inside = [s for s in trajectory.samples
                      if episode.start_time < s.t < episode.end_time and s.saturated]
            assert inside
            for sample in inside:
                expected = simulate_saturated_closed_form(
                    episode.start_state.x1, episode.start_state.x2,
                    25.0, episode.sign, sample.t - episode.start_time,
                )
                assert abs(sample.state.x1 - expected.x1) <= 1e-10
                assert abs(sample.state.x2 - expected.x2) <= 1e-10

    def test_flag_consistency_on_every_sample(self):
        spec = nl_spec(k=200.0, saturation=25.0)
        trajectory = simulate(spec, SimulationConfig(initial=State(1.0, 0.0)))
        for s in trajectory.samples:
            assert abs(s.v) <= 25.0
            assert s.saturated == (abs(s.v_raw) > 25.0)


class TestScalingSimilarity:
    def test_gain_rescales_time_and_velocity(self):
        # If (x1, x2) solves the loop with gain k, then
        # (x1(tau/sqrt(k)), x2(tau/sqrt(k))/sqrt(k)) solves it with gain 1.
        reference = simulate(
            nl_spec(k=1.0),
            SimulationConfig(initial=State(1.0, 0.0), t_end=1.0, v_stop=0.0,
                             abs_tol=1e-300, sample_interval=1e-3),
        )
        k = 4.0
        scale = math.sqrt(k)
        member = simulate(
            nl_spec(k=k),
            SimulationConfig(initial=State(1.0, 0.0), t_end=1.0 / scale, v_stop=0.0,
                             abs_tol=1e-300, sample_interval=1e-3 / scale),
        )
        assert len(member.samples) == len(reference.samples)
        for a, b in zip(member.samples, reference.samples):
            assert abs(a.state.x1 - b.state.x1) <= 1e-7
            assert abs(a.state.x2 / scale - b.state.x2) <= 1e-7
