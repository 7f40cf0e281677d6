"""Control-law evaluations: frozen examples and algebraic properties."""

import math

import numpy as np
import pytest

from nldamp import (
    ControlLaw,
    ControllerSpec,
    State,
    control,
    critical_gain,
    linear_control,
    nonlinear_control,
    saturate,
)


def nl_spec(k=100.0, saturation=math.inf, **kwargs):
    return ControllerSpec(law=ControlLaw.NONLINEAR, k=k, saturation=saturation, **kwargs)


class TestCriticalGain:
    def test_k_100_gives_20(self):
        assert critical_gain(100.0) == 20.0

    def test_k_1_gives_2(self):
        assert critical_gain(1.0) == 2.0

    def test_quarter_gives_1(self):
        # s^2 + d*s + 0.25 = (s + 0.5)^2  =>  d = 1
        assert critical_gain(0.25) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            critical_gain(0.0)
        with pytest.raises(ValueError):
            critical_gain(-4.0)


class TestLinearControl:
    def test_proportional_only_at_rest(self):
        assert linear_control(State(1.0, 0.0), 100.0, 20.0) == -100.0

    def test_damping_only_on_axis(self):
        assert linear_control(State(0.0, 1.0), 100.0, 20.0) == -20.0

    def test_combined(self):
        assert linear_control(State(1.0, -1.0), 100.0, 20.0) == -80.0


class TestNonlinearControl:
    def test_damping_vanishes_at_zero_velocity(self):
        assert nonlinear_control(State(1.0, 0.0), nl_spec()) == -100.0

    def test_zero_on_balance_curve(self):
        # k*|x1|*x1 = -|x2|*x2 at (1, -10) with k=100
        assert nonlinear_control(State(1.0, -10.0), nl_spec()) == 0.0

    def test_hand_value(self):
        # -100*0.5 - (2^2/0.5) = -50 - 8
        assert nonlinear_control(State(0.5, 2.0), nl_spec()) == -58.0

    def test_finite_on_axis(self):
        spec = nl_spec()
        value = nonlinear_control(State(0.0, 5.0), spec)
        assert math.isfinite(value)
        assert value == -spec.damping_cap  # capped braking

    def test_matches_ideal_formula_away_from_axis(self):
        rng = np.random.RandomState(7)
        spec = nl_spec(k=37.0)
        checked = 0
        for _ in range(500):
            x1 = rng.uniform(-5, 5)
            x2 = rng.uniform(-5, 5)
            if abs(x1) < 1e-6 or x2 * x2 / abs(x1) > spec.damping_cap:
                continue
            sign = 1.0 if x2 > 0 else -1.0 if x2 < 0 else 0.0
            ideal = -spec.k * x1 - x2 * x2 / abs(x1) * sign
            assert nonlinear_control(State(x1, x2), spec) == ideal
            checked += 1
        assert checked > 400

    def test_zero_on_nullcline_within_tolerance(self):
        rng = np.random.RandomState(11)
        for _ in range(300):
            k = rng.uniform(0.5, 200.0)
            x1 = rng.uniform(0.01, 2.0) * rng.choice([-1.0, 1.0])
            x2 = -math.copysign(1.0, x1) * math.sqrt(k) * abs(x1)
            value = nonlinear_control(State(x1, x2), nl_spec(k=k))
            assert abs(value) <= 1e-12


class TestSaturate:
    def test_clamps_low(self):
        assert saturate(-300.0, 25.0) == (-25.0, True)

    def test_inside(self):
        assert saturate(10.0, 25.0) == (10.0, False)

    def test_boundary_not_saturated(self):
        assert saturate(25.0, 25.0) == (25.0, False)
        assert saturate(-25.0, 25.0) == (-25.0, False)

    def test_unbounded_passthrough(self):
        assert saturate(-1e12, math.inf) == (-1e12, False)

    def test_magnitude_never_exceeds_limit(self):
        rng = np.random.RandomState(3)
        for _ in range(500):
            v_raw = rng.uniform(-1e6, 1e6)
            limit = rng.uniform(0.1, 100.0)
            v, flag = saturate(v_raw, limit)
            assert abs(v) <= limit
            assert flag == (abs(v_raw) > limit)


class TestControlDispatch:
    def test_none_keeps_proportional_term(self):
        out = control(State(1.0, 0.0), ControllerSpec(law=ControlLaw.NONE, k=1.0))
        assert out.v == -1.0
        assert not out.saturated

    def test_nullcline_under_saturation(self):
        out = control(State(1.0, -10.0), nl_spec(saturation=25.0))
        assert out.v == 0.0
        assert not out.saturated

    def test_clamped_nonlinear(self):
        out = control(State(1.0, 0.0), nl_spec(k=200.0, saturation=25.0))
        assert out.v == -25.0
        assert out.v_raw == -200.0
        assert out.saturated

    @pytest.mark.parametrize("law", list(ControlLaw))
    def test_odd_symmetry(self, law):
        rng = np.random.RandomState(17)
        for _ in range(300):
            k = rng.uniform(0.1, 300.0)
            spec = ControllerSpec(
                law=law, k=k, d=rng.uniform(0.0, 40.0),
                saturation=rng.choice([math.inf, rng.uniform(1.0, 50.0)]),
            )
            state = State(rng.uniform(-3, 3), rng.uniform(-3, 3))
            out = control(state, spec)
            mirrored = control(-state, spec)
            assert mirrored.v == -out.v
            assert mirrored.v_raw == -out.v_raw
            assert mirrored.saturated == out.saturated
