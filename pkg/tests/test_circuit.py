"""Chain-engine tests.

Covered invariants:
  * segment/schedule validation, half-open sampling, triangle ripple bounds;
  * modulation tables are total and match the documented rows;
  * analog helpers (inverting output, state signal, clamped adjustment);
  * single-stage chain reproduces the analytic switch time under a
    continuous pairing drive;
  * the reference schedules reproduce frozen switch/reset/speedup values;
  * higher-stage learning only happens while the previous stage's state
    signal is asserted;
  * CSV/metrics serialization is byte-deterministic.
"""

import math

import numpy as np
import pytest

from memassoc.circuit import (
    ChainConfig,
    ModulationRule,
    RuleTable,
    SCHEME_FORGETTING,
    SCHEME_LEARNING,
    SCHEME_NATURAL,
    Segment,
    StageConfig,
    StimulusSchedule,
    adjust_learning_voltage,
    default_duration,
    first_order_rules,
    higher_order_rules,
    logic_level,
    metrics,
    pavlov_schedule,
    run_chain,
    sample_signal,
    select_modulation_first,
    select_modulation_higher,
    state_signal,
    synaptic_output,
    write_metrics_report,
    write_sim_trace_csv,
)
from memassoc.device import DeviceParams
from memassoc.errors import InvalidInputError

PARAMS = DeviceParams()


def two_signal_schedule(windows_food, windows_ring, **seg_kwargs):
    return StimulusSchedule({
        "food": tuple(Segment(a, b) for a, b in windows_food),
        "ring1": tuple(Segment(a, b, **seg_kwargs) for a, b in windows_ring),
    })


def single_stage_chain(schedule, duration, dt=1e-4):
    return ChainConfig(stages=(StageConfig(rules=first_order_rules()),),
                       schedule=schedule, duration=duration, dt=dt)


class TestSegmentsAndSampling:
    def test_segment_validation(self):
        with pytest.raises(InvalidInputError):
            Segment(-0.1, 0.2)
        with pytest.raises(InvalidInputError):
            Segment(0.2, 0.2)
        with pytest.raises(InvalidInputError):
            Segment(0.0, 0.1, 1.0, zigzag_amplitude=0.1)  # ripple, no frequency
        with pytest.raises(InvalidInputError):
            Segment(0.0, math.inf)

    def test_overlap_rejected(self):
        with pytest.raises(InvalidInputError, match="overlap"):
            StimulusSchedule({"food": (Segment(0.0, 0.2), Segment(0.1, 0.3))})

    def test_touching_segments_allowed(self):
        sched = StimulusSchedule({"food": (Segment(0.1, 0.2), Segment(0.0, 0.1))})
        # normalised into start order
        assert [s.start for s in sched.signals["food"]] == [0.0, 0.1]

    def test_half_open_window(self):
        sched = two_signal_schedule([(0.1, 0.2)], [(0.1, 0.2)])
        assert sample_signal(sched, "food", 0.1) == 1.0
        assert sample_signal(sched, "food", 0.2 - 1e-12) == 1.0
        assert sample_signal(sched, "food", 0.2) == 0.0
        assert sample_signal(sched, "food", 0.05) == 0.0

    def test_sampling_errors(self):
        sched = two_signal_schedule([(0.0, 0.1)], [(0.0, 0.1)])
        with pytest.raises(InvalidInputError):
            sample_signal(sched, "ring7", 0.05)
        with pytest.raises(InvalidInputError):
            sample_signal(sched, "food", -0.01)

    def test_zigzag_bounds_and_phase(self):
        seg = Segment(0.2, 0.5, 1.0, zigzag_amplitude=0.1, zigzag_frequency=100.0)
        sched = StimulusSchedule({"ring1": (seg,), "food": (Segment(0.2, 0.5),)})
        ts = 0.2 + np.linspace(0.0, 0.3, 4001, endpoint=False)
        levels = np.array([sample_signal(sched, "ring1", float(t)) for t in ts])
        assert levels.min() >= 0.9 - 1e-12
        assert levels.max() <= 1.1 + 1e-12
        # ripple is phase-locked to the segment start
        assert sample_signal(sched, "ring1", 0.2) == pytest.approx(1.0)
        assert sample_signal(sched, "ring1", 0.2 + 0.0025) == pytest.approx(1.1)
        assert sample_signal(sched, "ring1", 0.2 + 0.0075) == pytest.approx(0.9)

    def test_engine_grid_matches_scalar_sampling(self):
        sched = pavlov_schedule(2)
        cfg = ChainConfig(
            stages=(StageConfig(rules=first_order_rules()),
                    StageConfig(rules=higher_order_rules())),
            schedule=sched, duration=1.7)
        trace = run_chain(cfg)
        rng = np.random.default_rng(7)
        for idx in rng.integers(0, len(trace.t), size=60):
            t = float(trace.t[idx])
            for j, name in enumerate(trace.signal_names):
                assert trace.signal_levels[j, idx] == pytest.approx(
                    sample_signal(sched, name, t), abs=1e-12)


class TestLogicAndRules:
    def test_logic_threshold(self):
        assert logic_level(0.49, 0.5) == 0
        assert logic_level(0.5, 0.5) == 1
        assert logic_level(0.9, 0.5) == 1   # rippled low stays high
        with pytest.raises(InvalidInputError):
            logic_level(math.nan, 0.5)

    def test_first_order_table(self):
        expected = {
            (1, 1): (SCHEME_LEARNING, 0.35),
            (0, 1): (SCHEME_FORGETTING, -0.175),
            (0, 0): (SCHEME_NATURAL, -0.165),
            (1, 0): (SCHEME_NATURAL, -0.165),
        }
        for bits, want in expected.items():
            assert select_modulation_first(*bits) == want

    def test_higher_order_table(self):
        expected = {
            (1, 1, 1): (SCHEME_LEARNING, 0.42),
            (0, 1, 1): (SCHEME_NATURAL, -0.18),
            (1, 0, 1): (SCHEME_FORGETTING, -0.19),
            (0, 0, 1): (SCHEME_FORGETTING, -0.19),
            (1, 1, 0): (SCHEME_NATURAL, -0.18),
            (0, 1, 0): (SCHEME_NATURAL, -0.18),
            (1, 0, 0): (SCHEME_NATURAL, -0.18),
            (0, 0, 0): (SCHEME_NATURAL, -0.18),
        }
        for bits, want in expected.items():
            got = select_modulation_higher(*bits, v_adjusted=0.42)
            assert got == want, bits

    def test_adjusted_voltage_required_for_learning_row(self):
        table = higher_order_rules()
        with pytest.raises(InvalidInputError):
            table.select((1, 1, 1))

    def test_table_must_be_total(self):
        with pytest.raises(InvalidInputError, match="exactly once"):
            RuleTable(2, (ModulationRule((1, 1), SCHEME_LEARNING, 0.3),))

    def test_table_must_not_overlap(self):
        with pytest.raises(InvalidInputError, match="exactly once"):
            RuleTable(1, (ModulationRule((None,), SCHEME_NATURAL, -0.1),
                          ModulationRule((1,), SCHEME_LEARNING, 0.3)))

    def test_select_arity_checked(self):
        with pytest.raises(InvalidInputError):
            first_order_rules().select((1, 1, 1))


class TestAnalogHelpers:
    def test_synaptic_output_inverts_and_scales(self):
        assert synaptic_output(0.1, 5e3, 20e3) == pytest.approx(-0.025)
        assert synaptic_output(-0.2, 5e3, 10e3) == pytest.approx(0.1)
        with pytest.raises(InvalidInputError):
            synaptic_output(0.1, 5e3, 0.0)

    def test_state_signal(self):
        assert state_signal(5e3, 50e3) == pytest.approx(0.1)
        assert state_signal(5e3, 20e3) == pytest.approx(0.25)
        assert state_signal(5e3, 190e3) == pytest.approx(0.0263157894736842)

    def test_adjust_learning_voltage_clamps(self):
        assert adjust_learning_voltage(0.25, 1.8, 0.47) == pytest.approx(0.45)
        assert adjust_learning_voltage(0.25, 2.5, 0.47) == pytest.approx(0.47)
        assert adjust_learning_voltage(-0.1, 1.8, 0.47) == 0.0
        with pytest.raises(InvalidInputError):
            adjust_learning_voltage(0.1, 1.8, 0.0)


class TestSingleStageChain:
    def test_continuous_pairing_matches_analytic_switch_time(self):
        # constant 0.35 V learning: time to come within 1% of r_on
        sched = two_signal_schedule([(0.0, 0.3)], [(0.0, 0.3)])
        trace = run_chain(single_stage_chain(sched, duration=0.3))
        got = metrics(trace)["stage1.switch_time_s"]
        rate = PARAMS.k_on * (0.35 / PARAMS.v_on - 1.0) ** PARAMS.alpha_on
        w_cross = 1.0 - math.log(1.01) / math.log(PARAMS.r_off / PARAMS.r_on)
        assert got == pytest.approx(w_cross / rate, abs=2e-4)

    def test_quiet_chain_never_switches(self):
        sched = StimulusSchedule({"food": (), "ring1": ()})
        trace = run_chain(single_stage_chain(sched, duration=0.05))
        report = metrics(trace)
        assert set(report) == {"stage1.peak_power_w"}
        assert float(trace.stages[0].r_ohm[-1]) == pytest.approx(190e3)

    def test_reset_after_training(self):
        # quiet tail: natural forgetting at -0.165 V back past 50 kohm
        sched = two_signal_schedule([(0.0, 0.3)], [(0.0, 0.3)])
        trace = run_chain(single_stage_chain(sched, duration=1.1))
        report = metrics(trace)
        rate = abs(PARAMS.k_off) * (0.165 / abs(PARAMS.v_off) - 1.0)
        dw = math.log(50e3 / 20e3) / math.log(190e3 / 20e3)
        assert report["stage1.reset_time_s"] == pytest.approx(dw / rate, rel=2e-3)

    def test_response_tracks_learning(self):
        trace = run_chain(single_stage_chain(pavlov_schedule(1), 1.5))
        i_early = int(round(0.125 / trace.dt))   # inside second pairing window
        i_late = int(round(0.93 / trace.dt))     # after switching completes
        assert abs(trace.stages[0].resp_v[i_late]) > 4 * abs(
            trace.stages[0].resp_v[i_early])
        # readout response present only while ring1 is high
        i_gap = int(round(0.57 / trace.dt))
        assert trace.stages[0].resp_v[i_gap] == 0.0

    def test_initial_state_override(self):
        sched = StimulusSchedule({"food": (), "ring1": ()})
        cfg = single_stage_chain(sched, duration=0.01)
        trace = run_chain(cfg, initial_states=[PARAMS.w_off])
        assert trace.stages[0].r_ohm[0] < 20.5e3
        with pytest.raises(InvalidInputError):
            run_chain(cfg, initial_states=[0.5, 0.5])


@pytest.fixture(scope="module")
def low_power():
    cfg = ChainConfig(
        stages=(StageConfig(rules=first_order_rules()),
                StageConfig(rules=higher_order_rules(),
                            gain=1.8, v_learn_max=0.47)),
        schedule=pavlov_schedule(2), duration=default_duration(2))
    trace = run_chain(cfg)
    return trace, metrics(trace)


@pytest.fixture(scope="module")
def high_gain():
    cfg = ChainConfig(
        stages=(StageConfig(rules=first_order_rules()),
                StageConfig(rules=higher_order_rules(),
                            gain=2.5, v_learn_max=0.65)),
        schedule=pavlov_schedule(2), duration=default_duration(2))
    trace = run_chain(cfg)
    return trace, metrics(trace)


class TestReferenceSchedules:
    def test_first_stage_switch_time(self, low_power):
        _, report = low_power
        assert report["stage1.switch_time_s"] == pytest.approx(0.2693, abs=1e-6)

    def test_forgetting_confined_to_probe_window(self, low_power):
        trace, _ = low_power
        rows = np.nonzero(trace.stages[0].scheme == SCHEME_FORGETTING)[0]
        assert rows.size == round(0.05 / trace.dt)
        assert np.all(np.diff(rows) == 1)
        assert trace.t[rows[0]] == pytest.approx(0.62, abs=trace.dt / 2)
        assert trace.t[rows[-1]] == pytest.approx(0.67 - trace.dt, abs=trace.dt / 2)

    def test_second_stage_speedup_low_power(self, low_power):
        _, report = low_power
        assert report["chain.speedup_1_2"] == pytest.approx(1.4386, abs=2e-3)

    def test_second_stage_speedup_high_gain(self, high_gain):
        _, report = high_gain
        assert report["chain.speedup_1_2"] == pytest.approx(2.3664, abs=2e-3)

    def test_low_power_peak(self, low_power):
        _, report = low_power
        # adjusted voltage saturates at 1.8 * 5k/20k = 0.45 V on a set device
        assert report["stage2.peak_power_w"] == pytest.approx(
            0.45 ** 2 / 20e3, rel=1e-9)
        assert report["stage2.peak_power_w"] <= 1.1e-5

    def test_second_stage_reset(self, low_power):
        _, report = low_power
        rate = abs(PARAMS.k_off) * (0.18 / abs(PARAMS.v_off) - 1.0)
        dw = math.log(50e3 / 20e3) / math.log(190e3 / 20e3)
        assert report["stage2.reset_time_s"] == pytest.approx(
            dw / rate, rel=2e-3)

    def test_learning_gated_by_previous_state(self, low_power):
        trace, _ = low_power
        learn_rows = trace.stages[1].scheme == SCHEME_LEARNING
        assert learn_rows.any()
        assert np.all(trace.stages[0].s_v[learn_rows] >= 0.1)

    def test_third_order_strictly_faster(self):
        cfg = ChainConfig(
            stages=(StageConfig(rules=first_order_rules()),
                    StageConfig(rules=higher_order_rules(),
                                gain=2.5, v_learn_max=0.65),
                    StageConfig(rules=higher_order_rules(),
                                gain=3.0, v_learn_max=0.8)),
            schedule=pavlov_schedule(3), duration=default_duration(3))
        report = metrics(run_chain(cfg))
        times = [report[f"stage{k}.switch_time_s"] for k in (1, 2, 3)]
        assert times[0] > times[1] > times[2]
        assert report["chain.speedup_1_2"] > 1.0
        assert report["chain.speedup_2_3"] > 1.0

    def test_ring_levels_rippled_food_plain(self, low_power):
        trace, _ = low_power
        food = trace.signal_levels[0]
        ring1 = trace.signal_levels[1]
        assert set(np.unique(food)) <= {0.0, 1.0}
        high = ring1[ring1 > 0]
        assert high.min() >= 0.9 - 1e-12 and high.max() <= 1.1 + 1e-12
        assert not np.all(high == 1.0)

    def test_unknown_preset_order(self):
        with pytest.raises(InvalidInputError):
            pavlov_schedule(4)
        with pytest.raises(InvalidInputError):
            default_duration(0)


class TestGating:
    def test_no_learning_without_prior_association(self):
        # rings pulse together but food never arrives: stage 1 decays or
        # actively forgets, so stage 2 must never enter the learning scheme
        sched = StimulusSchedule({
            "food": (),
            "ring1": (Segment(0.0, 0.2), Segment(0.3, 0.5)),
            "ring2": (Segment(0.0, 0.2), Segment(0.3, 0.5)),
        })
        cfg = ChainConfig(
            stages=(StageConfig(rules=first_order_rules()),
                    StageConfig(rules=higher_order_rules())),
            schedule=sched, duration=0.6)
        trace = run_chain(cfg)
        assert not np.any(trace.stages[1].scheme == SCHEME_LEARNING)
        assert np.all(trace.stages[1].scheme == SCHEME_NATURAL)

    def test_new_ring_alone_actively_forgets(self):
        sched = StimulusSchedule({
            "food": (), "ring1": (),
            "ring2": (Segment(0.0, 0.1),),
        })
        cfg = ChainConfig(
            stages=(StageConfig(rules=first_order_rules()),
                    StageConfig(rules=higher_order_rules())),
            schedule=sched, duration=0.2)
        trace = run_chain(cfg)
        early = trace.stages[1].scheme[:int(0.1 / cfg.dt)]
        assert np.all(early == SCHEME_FORGETTING)


class TestConfigValidation:
    def test_roles_must_match_stage_count(self):
        sched = StimulusSchedule({"food": (), "ring1": (), "ring2": ()})
        with pytest.raises(InvalidInputError, match="roles"):
            single_stage_chain(sched, duration=0.1)

    def test_stage_arity_enforced(self):
        sched = StimulusSchedule({"food": (), "ring1": ()})
        with pytest.raises(InvalidInputError, match="2-bit"):
            ChainConfig(stages=(StageConfig(rules=higher_order_rules()),),
                        schedule=sched, duration=0.1)
        sched2 = StimulusSchedule({"food": (), "ring1": (), "ring2": ()})
        with pytest.raises(InvalidInputError, match="3-bit"):
            ChainConfig(stages=(StageConfig(rules=first_order_rules()),
                                StageConfig(rules=first_order_rules())),
                        schedule=sched2, duration=0.1)

    def test_bad_timebase(self):
        sched = StimulusSchedule({"food": (), "ring1": ()})
        with pytest.raises(InvalidInputError):
            single_stage_chain(sched, duration=0.1, dt=0.0)
        with pytest.raises(InvalidInputError):
            single_stage_chain(sched, duration=0.0)

    def test_stage_config_validation(self):
        with pytest.raises(InvalidInputError):
            StageConfig(r_f=0.0)
        with pytest.raises(InvalidInputError):
            StageConfig(gain=-1.0)
        with pytest.raises(InvalidInputError):
            StageConfig(state_threshold_v=0.0)


class TestSerialization:
    def test_trace_csv_layout_and_determinism(self, tmp_path):
        cfg = ChainConfig(
            stages=(StageConfig(rules=first_order_rules()),
                    StageConfig(rules=higher_order_rules())),
            schedule=pavlov_schedule(2), duration=0.3)
        paths = []
        for name in ("a.csv", "b.csv"):
            p = tmp_path / name
            write_sim_trace_csv(run_chain(cfg), p)
            paths.append(p)
        first, second = (p.read_bytes() for p in paths)
        assert first == second
        header = first.decode().splitlines()[0].split(",")
        assert header == [
            "t_s", "food_v", "ring1_v", "ring2_v",
            "mod1_v", "scheme1", "r1_ohm", "s1_v", "resp1_v", "p1_w",
            "mod2_v", "scheme2", "r2_ohm", "s2_v", "resp2_v", "p2_w",
        ]
        assert len(first.decode().splitlines()) == 3001 + 1

    def test_metrics_report_format(self, tmp_path):
        path = tmp_path / "metrics.txt"
        write_metrics_report({"stage1.switch_time_s": 0.2693,
                              "chain.speedup_1_2": 1.4386}, path)
        lines = path.read_text().splitlines()
        assert lines == ["stage1.switch_time_s=0.2693",
                         "chain.speedup_1_2=1.4386"]
