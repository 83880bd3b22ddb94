"""Device model tests.

Invariants covered:
- drift rate branches: power-law beyond thresholds, dead zone between them,
  zero rate at the bound the drive pushes toward, zero at exact threshold;
- state boundedness under arbitrary drive;
- resistance map orientation and monotonicity, normalized-state identity;
- analytic switch-time oracle (w span / |rate|) vs the Euler integration;
- Euler self-consistency under timestep halving;
- pinched hysteresis and pulse-train monotonicity;
- dissipation arithmetic.

Expected numbers are recomputed here from closed forms rather than pasted,
so a regression in the model cannot hide behind a matching constant.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from memassoc.device import (
    DeviceParams,
    DeviceState,
    drift_rate,
    normalized_state,
    power,
    resistance,
    step,
)
from memassoc.errors import InvalidInputError

P = DeviceParams()  # reference parameter set

DT = 1e-4  # s, default integration step used throughout


def analytic_switch_time(params: DeviceParams, v: float) -> float:
    """Full-span traversal time under constant over-threshold drive."""
    rate = drift_rate(params, 0.5 * (params.w_on + params.w_off), v)
    return (params.w_off - params.w_on) / abs(rate)


class TestDriftRate:
    def test_set_branch_reference_point(self):
        # k_on * (0.35/0.14 - 1) = 2.82 * 1.5
        assert drift_rate(P, 0.5, 0.35) == pytest.approx(2.82 * 1.5, rel=1e-12)
        assert drift_rate(P, 0.5, 0.35) == pytest.approx(4.23, rel=1e-9)

    def test_reset_branch_reference_point(self):
        # k_off * (-0.32/-0.16 - 1) = -18.33 * 1.0
        assert drift_rate(P, 0.5, -0.32) == pytest.approx(-18.33, rel=1e-12)

    def test_dead_zone(self):
        for v in (0.10, 0.0, -0.1, 0.1399, -0.1599):
            assert drift_rate(P, 0.5, v) == 0.0

    def test_threshold_equality_is_zero_rate(self):
        assert drift_rate(P, 0.5, P.v_on) == 0.0
        assert drift_rate(P, 0.5, P.v_off) == 0.0

    def test_window_blocks_bound_being_pushed_toward(self):
        assert drift_rate(P, P.w_off, 0.35) == 0.0
        assert drift_rate(P, P.w_on, -0.35) == 0.0
        # the opposite bound does not block
        assert drift_rate(P, P.w_on, 0.35) > 0.0
        assert drift_rate(P, P.w_off, -0.35) < 0.0

    def test_natural_forgetting_rates(self):
        assert drift_rate(P, 0.5, -0.18) == pytest.approx(-18.33 * 0.125, rel=1e-12)
        assert drift_rate(P, 0.5, -0.165) == pytest.approx(-18.33 * 0.03125, rel=1e-12)

    def test_non_finite_input_rejected(self):
        with pytest.raises(InvalidInputError):
            drift_rate(P, float("nan"), 0.2)
        with pytest.raises(InvalidInputError):
            drift_rate(P, 0.5, float("inf"))


class TestResistanceMap:
    def test_endpoints(self):
        assert resistance(P, P.w_off) == pytest.approx(P.r_on, rel=1e-12)
        assert resistance(P, P.w_on) == pytest.approx(P.r_off, rel=1e-12)

    def test_midpoint_is_geometric_mean(self):
        assert resistance(P, 0.5) == pytest.approx(math.sqrt(P.r_on * P.r_off), rel=1e-12)
        assert resistance(P, 0.5) == pytest.approx(61644.14, rel=1e-6)

    def test_strictly_decreasing_in_w(self):
        w = np.linspace(P.w_on, P.w_off, 101)
        r = np.array([resistance(P, wi) for wi in w])
        assert np.all(np.diff(r) < 0.0)
        assert np.all((r >= P.r_on - 1e-9) & (r <= P.r_off + 1e-9))

    def test_normalized_state_identity(self):
        for w in np.linspace(P.w_on, P.w_off, 11):
            n_direct = normalized_state(P, w)
            n_from_r = math.log(resistance(P, w) / P.r_on) / math.log(P.r_off / P.r_on)
            assert n_direct == pytest.approx(n_from_r, abs=1e-12)
        assert normalized_state(P, P.w_off) == 0.0
        assert normalized_state(P, P.w_on) == 1.0

    def test_half_set_state_from_50k(self):
        # w such that R = 50 kohm, via the log identity
        w_50k = P.w_off - math.log(50e3 / P.r_on) / math.log(P.r_off / P.r_on)
        assert resistance(P, w_50k) == pytest.approx(50e3, rel=1e-12)
        assert normalized_state(P, w_50k) == pytest.approx(0.4070, abs=5e-5)


class TestStep:
    def test_single_euler_update(self):
        s = step(P, DeviceState(0.0), 0.35, 1e-3)
        assert s.w == pytest.approx(1e-3 * 4.23, rel=1e-9)

    def test_clamps_at_bounds(self):
        assert step(P, DeviceState(0.999999), 0.5, 1.0).w == P.w_off
        assert step(P, DeviceState(1e-6), -0.5, 1.0).w == P.w_on

    def test_rejects_bad_dt(self):
        with pytest.raises(InvalidInputError):
            step(P, DeviceState(0.5), 0.2, 0.0)
        with pytest.raises(InvalidInputError):
            step(P, DeviceState(0.5), 0.2, -1e-4)

    def test_bounded_under_random_drive(self):
        rng = np.random.default_rng(42)
        state = DeviceState(0.3)
        for v in rng.uniform(-2.0, 2.0, size=4000):
            state = step(P, state, float(v), DT)
            assert P.w_on <= state.w <= P.w_off

    def test_dead_zone_holds_state(self):
        state = DeviceState(0.37)
        for _ in range(1000):
            state = step(P, state, 0.12, DT)
        assert state.w == 0.37


class TestSwitchTimeOracle:
    """Simulated traversal matches span / |rate| within 1% at dt = 0.1 ms."""

    @pytest.mark.parametrize("v", [0.35, 0.5, 0.28])
    def test_set_direction(self, v):
        expect = analytic_switch_time(P, v)
        state, t = DeviceState(P.w_on), 0.0
        while state.w < P.w_off:
            state = step(P, state, v, DT)
            t += DT
            assert t < 2.0
        assert t == pytest.approx(expect, rel=0.01)

    @pytest.mark.parametrize("v", [-0.32, -0.18])
    def test_reset_direction(self, v):
        expect = analytic_switch_time(P, v)
        state, t = DeviceState(P.w_off), 0.0
        while state.w > P.w_on:
            state = step(P, state, v, DT)
            t += DT
            assert t < 10.0
        assert t == pytest.approx(expect, rel=0.01)

    def test_full_set_at_learning_voltage_reference(self):
        # 1 / 4.23 = 0.23641 s
        assert analytic_switch_time(P, 0.35) == pytest.approx(0.23641, abs=5e-6)


def _integrate(drive, dt: float, w0: float = 0.0) -> float:
    """Final w after stepping through drive(t) over [0, 1) s."""
    n = int(round(1.0 / dt))
    state = DeviceState(w0)
    for k in range(n):
        state = step(P, state, drive(k * dt), dt)
    return state.w


class TestEulerConvergence:
    """Halving dt changes the final state of a fixed 1 s drive by < 1e-3."""

    @pytest.mark.parametrize("drive", [
        lambda t: 0.35,                                      # saturating
        lambda t: 0.5 * math.sin(2 * math.pi * 10.0 * t),    # cyclic
        lambda t: 0.3 * math.sin(2 * math.pi * 7.0 * t) + 0.4 * t,  # mixed
    ])
    def test_dt_halving(self, drive):
        w_coarse = _integrate(drive, DT)
        w_fine = _integrate(drive, DT / 2)
        assert abs(w_coarse - w_fine) < 1e-3


class TestHysteresisAndPulses:
    def test_pinched_loop_under_sinusoid(self):
        f, amp = 10.0, 0.5
        n = int(round(0.2 / DT))  # two periods
        state = DeviceState(P.w_on)
        vs, cur, rs = [], [], []
        for k in range(n + 1):
            v = amp * math.sin(2 * math.pi * f * k * DT)
            r = resistance(P, state.w)
            vs.append(v)
            cur.append(v / r)
            rs.append(r)
            state = step(P, state, v, DT)
        vs, cur, rs = np.array(vs), np.array(cur), np.array(rs)
        # pinch: negligible current whenever voltage is negligible
        near_zero = np.abs(vs) < 1e-6
        assert near_zero.any()
        assert np.all(np.abs(cur[near_zero]) < 1e-9)
        # resistance confined to its bounds
        assert np.all((rs >= P.r_on - 1e-9) & (rs <= P.r_off + 1e-9))
        # the loop enclosed area is nonzero: state actually moved
        assert np.ptp(rs) > 1e3

    def test_set_pulse_train_monotone_conductance(self):
        state = DeviceState(P.w_on)
        conductance = [1.0 / resistance(P, state.w)]
        for _ in range(20):
            for _ in range(100):   # 10 ms at +0.35 V
                state = step(P, state, 0.35, DT)
            for _ in range(100):   # 10 ms rest at 0 V (dead zone)
                state = step(P, state, 0.0, DT)
            conductance.append(1.0 / resistance(P, state.w))
        diffs = np.diff(conductance)
        assert np.all(diffs >= -1e-15)
        assert diffs[0] > 0.0  # strictly increasing until saturation

    def test_reset_pulse_train_monotone_resistance(self):
        state = DeviceState(P.w_off)
        res = [resistance(P, state.w)]
        for _ in range(20):
            for _ in range(100):   # 10 ms at -0.2 V
                state = step(P, state, -0.2, DT)
            for _ in range(100):
                state = step(P, state, 0.0, DT)
            res.append(resistance(P, state.w))
        diffs = np.diff(res)
        assert np.all(diffs >= -1e-9)
        assert diffs[0] > 0.0


class TestPower:
    def test_reference_values(self):
        assert power(0.35, 20e3) == pytest.approx(6.125e-6, rel=1e-12)
        assert power(0.45, 20e3) == pytest.approx(1.0125e-5, rel=1e-12)

    def test_rejects_nonpositive_resistance(self):
        with pytest.raises(InvalidInputError):
            power(0.1, 0.0)
        with pytest.raises(InvalidInputError):
            power(0.1, -5.0)


class TestParamValidation:
    def test_resistance_order(self):
        with pytest.raises(InvalidInputError):
            DeviceParams(r_on=200e3, r_off=20e3)

    def test_threshold_signs(self):
        with pytest.raises(InvalidInputError):
            DeviceParams(v_on=-0.1)
        with pytest.raises(InvalidInputError):
            DeviceParams(v_off=0.1)

    def test_rate_signs(self):
        with pytest.raises(InvalidInputError):
            DeviceParams(k_on=-1.0)
        with pytest.raises(InvalidInputError):
            DeviceParams(k_off=5.0)

    def test_state_bounds_order(self):
        with pytest.raises(InvalidInputError):
            DeviceParams(w_on=1.0, w_off=0.0)

    def test_non_finite_state_rejected(self):
        with pytest.raises(InvalidInputError):
            DeviceState(float("nan"))
