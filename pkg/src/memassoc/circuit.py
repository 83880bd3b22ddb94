"""Associative-learning chain: stimuli, modulation tables, stage engine.

An N-order chain couples N memristive synaptic stages.  Stage 1 associates
the unconditioned `food` signal with `ring1`; each higher stage k links
`ring(k)` to the already-learned `ring(k-1)`, gated by the previous stage's
state signal.

Signals are square pulses described by half-open segments [start, end).
Ring signals carry a triangular ripple on their high level; the ripple
amplitude stays well below the logic threshold margin, so detection is
unaffected.

Per engine step at time t:

1. sample all signal levels and derive logic bits;
2. stage 1: pick (scheme, voltage) from the first-order table on
   (food, ring1) bits and advance the device by one Euler step;
3. stage k >= 2: compute the previous stage's state signal S = r_f / M
   from its freshly updated resistance, clamp the adjusted learning
   voltage g * S, pick the scheme from the higher-order table on
   (state bit, ring(k-1) bit, ring(k) bit), advance the device;
4. record per stage: modulation voltage, scheme, resistance, state
   signal, readout response, instantaneous power.

The recorded resistance is the post-step value, which is exactly the value
the next stage's gate saw; the response voltage is the sub-threshold
readout amplitude passed through the inverting stage whenever the stage's
conditioned stimulus is present; power is modulation voltage squared over
the recorded resistance.

Everything here is pure and deterministic: identical configs produce
bit-identical traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .device import DeviceParams, DeviceState, power, resistance, step
from .errors import InvalidInputError

__all__ = [
    "SCHEME_LEARNING",
    "SCHEME_FORGETTING",
    "SCHEME_NATURAL",
    "Segment",
    "StimulusSchedule",
    "sample_signal",
    "logic_level",
    "ModulationRule",
    "RuleTable",
    "first_order_rules",
    "higher_order_rules",
    "select_modulation_first",
    "select_modulation_higher",
    "synaptic_output",
    "state_signal",
    "adjust_learning_voltage",
    "StageConfig",
    "ChainConfig",
    "StageTrace",
    "SimTrace",
    "run_chain",
    "metrics",
    "write_sim_trace_csv",
    "write_metrics_report",
    "pavlov_schedule",
    "default_duration",
]

SCHEME_LEARNING = "learning"
SCHEME_FORGETTING = "forgetting"
SCHEME_NATURAL = "natural_forgetting"

# First-order modulation levels (V): learning on food+ring coincidence,
# active forgetting on ring alone, slow natural decay otherwise.
LEARNING_V_FIRST = 0.35
FORGETTING_V_FIRST = -0.175
NATURAL_V_FIRST = -0.165
# Higher-order levels (V); learning voltage is the adjusted state signal.
FORGETTING_V_HIGHER = -0.19
NATURAL_V_HIGHER = -0.18

DEFAULT_R_F = 5e3             # ohm, feedback resistance of the inverting stage
DEFAULT_STATE_THRESHOLD = 0.1  # V, state-signal level that asserts "learned"
DEFAULT_LOGIC_THRESHOLD = 0.5  # V, stimulus presence threshold
DEFAULT_READOUT_V = 0.1        # V, sub-threshold readout amplitude
DEFAULT_ZIGZAG_AMPLITUDE = 0.1  # V, ripple on ring highs
DEFAULT_ZIGZAG_FREQUENCY = 100.0  # Hz
DEFAULT_HIGH_LEVEL = 1.0       # V, stimulus high level


@dataclass(frozen=True)
class Segment:
    """Half-open active window [start, end) of one signal."""

    start: float
    end: float
    level: float = DEFAULT_HIGH_LEVEL
    zigzag_amplitude: float = 0.0
    zigzag_frequency: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.start, self.end, self.level,
                self.zigzag_amplitude, self.zigzag_frequency)
        if not all(math.isfinite(x) for x in vals):
            raise InvalidInputError(f"segment fields must be finite: {self!r}")
        if self.start < 0.0 or self.end <= self.start:
            raise InvalidInputError(
                f"segment needs 0 <= start < end, got [{self.start!r}, {self.end!r})")
        if self.zigzag_amplitude < 0.0:
            raise InvalidInputError("zigzag amplitude must be >= 0")
        if self.zigzag_amplitude > 0.0 and self.zigzag_frequency <= 0.0:
            raise InvalidInputError("zigzag ripple needs a positive frequency")


def _triangle(phase: float) -> float:
    """Unit triangle wave over phase in [0, 1): 0 -> +1 -> 0 -> -1 -> 0."""
    p = phase - math.floor(phase)
    if p < 0.25:
        return 4.0 * p
    if p < 0.75:
        return 2.0 - 4.0 * p
    return 4.0 * p - 4.0


@dataclass(frozen=True)
class StimulusSchedule:
    """Per-signal ordered, non-overlapping segments keyed by role name."""

    signals: dict[str, tuple[Segment, ...]]

    def __post_init__(self) -> None:
        normalized: dict[str, tuple[Segment, ...]] = {}
        for name, segments in self.signals.items():
            segs = tuple(sorted(segments, key=lambda s: s.start))
            for a, b in zip(segs, segs[1:]):
                if b.start < a.end:
                    raise InvalidInputError(
                        f"signal {name!r}: segments [{a.start}, {a.end}) and "
                        f"[{b.start}, {b.end}) overlap")
            normalized[name] = segs
        object.__setattr__(self, "signals", normalized)

    def roles(self) -> tuple[str, ...]:
        return tuple(self.signals)

    def end_time(self) -> float:
        """Latest segment end over all signals; 0.0 for an empty schedule."""
        ends = [seg.end for segs in self.signals.values() for seg in segs]
        return max(ends) if ends else 0.0


def sample_signal(schedule: StimulusSchedule, signal: str, t: float) -> float:
    """Signal level at time t: segment level plus ripple, 0 outside."""
    if signal not in schedule.signals:
        raise InvalidInputError(f"unknown signal role {signal!r}")
    if not math.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"sample time must be finite and >= 0, got {t!r}")
    for seg in schedule.signals[signal]:
        if seg.start <= t < seg.end:
            ripple = 0.0
            if seg.zigzag_amplitude > 0.0:
                ripple = seg.zigzag_amplitude * _triangle(
                    (t - seg.start) * seg.zigzag_frequency)
            return seg.level + ripple
    return 0.0


def _sample_signal_array(schedule: StimulusSchedule, signal: str,
                         t: np.ndarray) -> np.ndarray:
    """Vectorized `sample_signal` over a time grid (same semantics)."""
    out = np.zeros_like(t)
    for seg in schedule.signals[signal]:
        mask = (t >= seg.start) & (t < seg.end)
        if not mask.any():
            continue
        level = np.full(int(mask.sum()), seg.level)
        if seg.zigzag_amplitude > 0.0:
            phase = (t[mask] - seg.start) * seg.zigzag_frequency
            p = phase - np.floor(phase)
            tri = np.where(p < 0.25, 4.0 * p,
                           np.where(p < 0.75, 2.0 - 4.0 * p, 4.0 * p - 4.0))
            level = level + seg.zigzag_amplitude * tri
        out[mask] = level
    return out


def logic_level(v: float, threshold: float) -> int:
    """1 when the level reaches the threshold, else 0."""
    if not (math.isfinite(v) and math.isfinite(threshold)):
        raise InvalidInputError(f"non-finite logic input: v={v!r}, threshold={threshold!r}")
    return 1 if v >= threshold else 0


@dataclass(frozen=True)
class ModulationRule:
    """One truth-table row: bit pattern (None = wildcard) -> scheme.

    `voltage` None marks the adjusted-state-signal learning voltage of
    higher-order stages, resolved per step by the engine.
    """

    bits: tuple[int | None, ...]
    scheme: str
    voltage: float | None

    def matches(self, bits: Sequence[int]) -> bool:
        return all(rb is None or rb == b for rb, b in zip(self.bits, bits))


@dataclass(frozen=True)
class RuleTable:
    """Total, non-overlapping rule set over a fixed number of logic bits."""

    n_bits: int
    rules: tuple[ModulationRule, ...]

    def __post_init__(self) -> None:
        for combo in np.ndindex(*(2,) * self.n_bits):
            hits = [r for r in self.rules if r.matches(combo)]
            if len(hits) != 1:
                raise InvalidInputError(
                    f"rule table must fire exactly once for {combo}, "
                    f"got {len(hits)} matches")

    def select(self, bits: Sequence[int],
               v_adjusted: float | None = None) -> tuple[str, float]:
        """Resolve (scheme, modulation voltage) for a bit pattern."""
        if len(bits) != self.n_bits:
            raise InvalidInputError(
                f"expected {self.n_bits} bits, got {len(bits)}")
        for rule in self.rules:
            if rule.matches(bits):
                if rule.voltage is None:
                    if v_adjusted is None:
                        raise InvalidInputError(
                            "rule needs an adjusted learning voltage")
                    return rule.scheme, v_adjusted
                return rule.scheme, rule.voltage
        raise InvalidInputError(f"no rule fires for bits {tuple(bits)}")


def first_order_rules(learning_v: float = LEARNING_V_FIRST,
                      forgetting_v: float = FORGETTING_V_FIRST,
                      natural_v: float = NATURAL_V_FIRST) -> RuleTable:
    """Stage-1 table over (food, ring1) bits.

    Coincidence learns; the conditioned stimulus alone actively forgets;
    everything else (including food alone) decays naturally.
    """
    return RuleTable(2, (
        ModulationRule((1, 1), SCHEME_LEARNING, learning_v),
        ModulationRule((0, 1), SCHEME_FORGETTING, forgetting_v),
        ModulationRule((0, 0), SCHEME_NATURAL, natural_v),
        ModulationRule((1, 0), SCHEME_NATURAL, natural_v),
    ))


def higher_order_rules(forgetting_v: float = FORGETTING_V_HIGHER,
                       natural_v: float = NATURAL_V_HIGHER) -> RuleTable:
    """Stage-k table over (previous state, ring(k-1), ring(k)) bits.

    Learning requires the new stimulus, the previously learned stimulus,
    and an asserted previous stage; the new stimulus without its
    predecessor actively forgets; the remaining rows decay naturally.
    """
    return RuleTable(3, (
        ModulationRule((1, 1, 1), SCHEME_LEARNING, None),
        ModulationRule((0, 1, 1), SCHEME_NATURAL, natural_v),
        ModulationRule((None, 0, 1), SCHEME_FORGETTING, forgetting_v),
        ModulationRule((None, 0, 0), SCHEME_NATURAL, natural_v),
        ModulationRule((None, 1, 0), SCHEME_NATURAL, natural_v),
    ))


def select_modulation_first(food_bit: int, ring_bit: int) -> tuple[str, float]:
    """(scheme, voltage) for stage 1 at default levels."""
    return first_order_rules().select((food_bit, ring_bit))


def select_modulation_higher(state_bit: int, ring_prev_bit: int,
                             ring_new_bit: int,
                             v_adjusted: float) -> tuple[str, float]:
    """(scheme, voltage) for a higher-order stage at default levels."""
    return higher_order_rules().select(
        (state_bit, ring_prev_bit, ring_new_bit), v_adjusted)


def synaptic_output(v_in: float, r_f: float, m: float) -> float:
    """Inverting stage output -v_in * r_f / m (memristor at the input)."""
    if not all(math.isfinite(x) for x in (v_in, r_f, m)) or r_f <= 0 or m <= 0:
        raise InvalidInputError(
            f"need finite v_in and positive r_f, m; got {v_in!r}, {r_f!r}, {m!r}")
    return -v_in * r_f / m


def state_signal(r_f: float, m: float) -> float:
    """Learned-state signal S = r_f / m; grows as the stage sets."""
    if not all(math.isfinite(x) for x in (r_f, m)) or r_f <= 0 or m <= 0:
        raise InvalidInputError(f"need positive r_f and m, got {r_f!r}, {m!r}")
    return r_f / m


def adjust_learning_voltage(s: float, gain: float, v_max: float) -> float:
    """Amplified state signal clamped to [0, v_max]."""
    if not all(math.isfinite(x) for x in (s, gain, v_max)) or v_max <= 0:
        raise InvalidInputError(
            f"need finite s, gain and v_max > 0, got {s!r}, {gain!r}, {v_max!r}")
    return min(max(gain * s, 0.0), v_max)


@dataclass(frozen=True)
class StageConfig:
    """One synaptic stage: device, rule table, and analog constants."""

    device: DeviceParams = field(default_factory=DeviceParams)
    rules: RuleTable = field(default_factory=higher_order_rules)
    r_f: float = DEFAULT_R_F                 # ohm, feedback resistance
    gain: float = 1.8                        # adjusted-voltage gain
    v_learn_max: float = 0.47                # V, adjusted-voltage clamp
    state_threshold_v: float = DEFAULT_STATE_THRESHOLD  # V, on previous stage's S

    def __post_init__(self) -> None:
        if self.r_f <= 0.0 or not math.isfinite(self.r_f):
            raise InvalidInputError(f"r_f must be positive, got {self.r_f!r}")
        if self.gain <= 0.0 or not math.isfinite(self.gain):
            raise InvalidInputError(f"gain must be positive, got {self.gain!r}")
        if self.v_learn_max <= 0.0 or not math.isfinite(self.v_learn_max):
            raise InvalidInputError(
                f"v_learn_max must be positive, got {self.v_learn_max!r}")
        if self.state_threshold_v <= 0.0 or not math.isfinite(self.state_threshold_v):
            raise InvalidInputError(
                f"state_threshold_v must be positive, got {self.state_threshold_v!r}")


@dataclass(frozen=True)
class ChainConfig:
    """Full chain description; stage k (1-based) reads `ring(k)`."""

    stages: tuple[StageConfig, ...]
    schedule: StimulusSchedule
    duration: float
    dt: float = 1e-4
    logic_threshold: float = DEFAULT_LOGIC_THRESHOLD
    readout_amplitude: float = DEFAULT_READOUT_V

    def __post_init__(self) -> None:
        if len(self.stages) < 1:
            raise InvalidInputError("chain needs at least one stage")
        if self.dt <= 0.0 or not math.isfinite(self.dt):
            raise InvalidInputError(f"dt must be positive, got {self.dt!r}")
        if self.duration < self.dt or not math.isfinite(self.duration):
            raise InvalidInputError(
                f"duration must cover at least one step, got {self.duration!r}")
        if self.readout_amplitude < 0.0:
            raise InvalidInputError("readout amplitude must be >= 0")
        needed = self.signal_names()
        roles = set(self.schedule.roles())
        if roles != set(needed):
            raise InvalidInputError(
                f"schedule roles {sorted(roles)} must be exactly {list(needed)}")
        if self.stages[0].rules.n_bits != 2:
            raise InvalidInputError("stage 1 needs a 2-bit (food, ring) rule table")
        for k, stage in enumerate(self.stages[1:], start=2):
            if stage.rules.n_bits != 3:
                raise InvalidInputError(
                    f"stage {k} needs a 3-bit (state, ring, ring) rule table")

    def signal_names(self) -> tuple[str, ...]:
        return ("food",) + tuple(f"ring{k}" for k in range(1, len(self.stages) + 1))


@dataclass(frozen=True)
class StageTrace:
    """Per-stage recorded columns plus the constants metrics needs."""

    mod_v: np.ndarray
    scheme: np.ndarray
    r_ohm: np.ndarray
    s_v: np.ndarray
    resp_v: np.ndarray
    p_w: np.ndarray
    r_on: float
    reset_r_ohm: float


@dataclass(frozen=True)
class SimTrace:
    """Column-oriented chain simulation record on a uniform time grid."""

    t: np.ndarray
    dt: float
    signal_names: tuple[str, ...]
    signal_levels: np.ndarray      # shape (n_signals, n_rows)
    stages: tuple[StageTrace, ...]


def run_chain(config: ChainConfig,
              initial_states: Sequence[float] | None = None) -> SimTrace:
    """Integrate the whole chain on a uniform grid of `dt` steps.

    `initial_states` optionally sets each stage's starting w; the default
    is the fully reset state w_on.
    """
    n_stages = len(config.stages)
    if initial_states is None:
        initial_states = [st.device.w_on for st in config.stages]
    if len(initial_states) != n_stages:
        raise InvalidInputError(
            f"need {n_stages} initial states, got {len(initial_states)}")

    n_rows = int(round(config.duration / config.dt)) + 1
    t = np.arange(n_rows) * config.dt
    names = config.signal_names()
    levels = np.vstack([_sample_signal_array(config.schedule, name, t)
                        for name in names])
    bits = (levels >= config.logic_threshold).astype(np.int8)

    states = [DeviceState(w) for w in initial_states]
    mod_v = [np.empty(n_rows) for _ in range(n_stages)]
    scheme = [np.empty(n_rows, dtype="<U18") for _ in range(n_stages)]
    r_ohm = [np.empty(n_rows) for _ in range(n_stages)]
    s_v = [np.empty(n_rows) for _ in range(n_stages)]
    resp_v = [np.empty(n_rows) for _ in range(n_stages)]
    p_w = [np.empty(n_rows) for _ in range(n_stages)]

    dt = config.dt
    readout = config.readout_amplitude
    for i in range(n_rows):
        s_prev = 0.0
        for k, stage in enumerate(config.stages):
            if k == 0:
                key = (int(bits[0, i]), int(bits[1, i]))
                sch, v_mod = stage.rules.select(key)
            else:
                v_adj = adjust_learning_voltage(s_prev, stage.gain,
                                                stage.v_learn_max)
                state_bit = 1 if s_prev >= stage.state_threshold_v else 0
                key = (state_bit, int(bits[k, i]), int(bits[k + 1, i]))
                sch, v_mod = stage.rules.select(key, v_adj)
            states[k] = step(stage.device, states[k], v_mod, dt)
            r = resistance(stage.device, states[k].w)
            s = state_signal(stage.r_f, r)
            mod_v[k][i] = v_mod
            scheme[k][i] = sch
            r_ohm[k][i] = r
            s_v[k][i] = s
            resp_v[k][i] = (synaptic_output(readout, stage.r_f, r)
                            if bits[k + 1, i] else 0.0)
            p_w[k][i] = power(v_mod, r)
            s_prev = s

    stage_traces = tuple(
        StageTrace(mod_v=mod_v[k], scheme=scheme[k], r_ohm=r_ohm[k],
                   s_v=s_v[k], resp_v=resp_v[k], p_w=p_w[k],
                   r_on=config.stages[k].device.r_on,
                   reset_r_ohm=config.stages[k].r_f
                   / config.stages[k].state_threshold_v)
        for k in range(n_stages))
    return SimTrace(t=t, dt=dt, signal_names=names, signal_levels=levels,
                    stages=stage_traces)


def metrics(trace: SimTrace) -> dict[str, float]:
    """Summary metrics of a chain trace.

    Per stage k:
      stageK.switch_time_s   accumulated learning-scheme time until the
                             resistance first reaches within 1% of r_on
                             (absent when the stage never switches);
      stageK.peak_power_w    maximum instantaneous power;
      stageK.reset_time_s    time from the end of the last stimulus until
                             the resistance climbs back to the learned-state
                             boundary r_f / state_threshold (absent when the
                             stage was not set at stimulus end, or never
                             recovers within the trace).
    Between stages: chain.speedup_K_(K+1) = switch_time K / switch_time K+1.
    """
    report: dict[str, float] = {}
    any_active = trace.signal_levels.max(axis=0) > 0.0
    last_stim = int(np.nonzero(any_active)[0][-1]) if any_active.any() else None

    switch_times: dict[int, float] = {}
    for k, stage in enumerate(trace.stages, start=1):
        threshold = stage.r_on * 1.01
        learning = stage.scheme == SCHEME_LEARNING
        accumulated = np.cumsum(learning.astype(float)) * trace.dt
        crossed = np.nonzero(stage.r_ohm <= threshold)[0]
        if crossed.size:
            st = float(accumulated[crossed[0]])
            switch_times[k] = st
            report[f"stage{k}.switch_time_s"] = st
        report[f"stage{k}.peak_power_w"] = float(stage.p_w.max())
        if last_stim is not None and stage.r_ohm[last_stim] < stage.reset_r_ohm:
            after = stage.r_ohm[last_stim:]
            recovered = np.nonzero(after >= stage.reset_r_ohm)[0]
            if recovered.size:
                report[f"stage{k}.reset_time_s"] = float(recovered[0]) * trace.dt
    for k in range(1, len(trace.stages)):
        if k in switch_times and k + 1 in switch_times:
            report[f"chain.speedup_{k}_{k + 1}"] = (
                switch_times[k] / switch_times[k + 1])
    return report


def write_sim_trace_csv(trace: SimTrace, path: str | Path) -> None:
    """Emit the trace with one row per step.

    Header: t_s, one level column per signal, then per stage K the block
    modK_v, schemeK, rK_ohm, sK_v, respK_v, pK_w.
    """
    header = ["t_s"] + [f"{name}_v" for name in trace.signal_names]
    for k in range(1, len(trace.stages) + 1):
        header += [f"mod{k}_v", f"scheme{k}", f"r{k}_ohm",
                   f"s{k}_v", f"resp{k}_v", f"p{k}_w"]
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        n_sig = len(trace.signal_names)
        for i in range(len(trace.t)):
            cells = [f"{trace.t[i]:.10g}"]
            cells += [f"{trace.signal_levels[j, i]:.10g}" for j in range(n_sig)]
            for stage in trace.stages:
                cells += [f"{stage.mod_v[i]:.10g}", str(stage.scheme[i]),
                          f"{stage.r_ohm[i]:.10g}", f"{stage.s_v[i]:.10g}",
                          f"{stage.resp_v[i]:.10g}", f"{stage.p_w[i]:.10g}"]
            fh.write(",".join(cells) + "\n")


def write_metrics_report(report: dict[str, float], path: str | Path) -> None:
    """Flat key=value lines, stage keys first, then chain ratios."""
    with Path(path).open("w") as fh:
        for key in report:
            fh.write(f"{key}={report[key]:.10g}\n")


# --- reference stimulus schedules -----------------------------------------

# Training cadence: 50 ms pulses with 50 ms gaps from t = 0; the window
# [0.62, 0.67) s presents ring 1 alone (active forgetting probe); pairing
# resumes and runs through 0.97 s.  Higher-order pairing windows then
# follow on a 75 ms cadence (50 ms on / 25 ms off), each phase joining the
# next ring while keeping every earlier signal co-pulsed so that no earlier
# stage is pushed into active forgetting while a later stage learns.
_BASE_WINDOWS = [(0.0, 0.05), (0.1, 0.15), (0.2, 0.25), (0.3, 0.35),
                 (0.4, 0.45), (0.5, 0.55)]
_FOOD_SOLO_GAP = (0.6, 0.62)   # food drops out here: ring 1 continues alone
_RING1_BRIDGE = (0.6, 0.67)
_LATE_WINDOWS = [(0.7, 0.75), (0.8, 0.85), (0.9, 0.97)]
_PAIR_SLOTS = [(0.995, 1.045), (1.07, 1.12), (1.145, 1.195), (1.22, 1.27)]
_SECOND_ORDER_START = 0.92     # ring 2 joins inside the (0.9, 0.97) window

_PRESET_DURATION = {1: 1.5, 2: 1.7, 3: 1.8}


def default_duration(n_orders: int) -> float:
    """Reference run length (s) for `pavlov_schedule(n_orders)`."""
    if n_orders not in _PRESET_DURATION:
        raise InvalidInputError(
            f"no reference schedule for order {n_orders}; supply segments")
    return _PRESET_DURATION[n_orders]


def pavlov_schedule(n_orders: int,
                    high_level: float = DEFAULT_HIGH_LEVEL,
                    zigzag_amplitude: float = DEFAULT_ZIGZAG_AMPLITUDE,
                    zigzag_frequency: float = DEFAULT_ZIGZAG_FREQUENCY,
                    ) -> StimulusSchedule:
    """Reference conditioning schedule for chains of order 1, 2 or 3."""
    if n_orders not in _PRESET_DURATION:
        raise InvalidInputError(
            f"no reference schedule for order {n_orders}; supply segments")

    def plain(windows: Iterable[tuple[float, float]]) -> tuple[Segment, ...]:
        return tuple(Segment(a, b, high_level) for a, b in windows)

    def rippled(windows: Iterable[tuple[float, float]]) -> tuple[Segment, ...]:
        return tuple(Segment(a, b, high_level, zigzag_amplitude,
                             zigzag_frequency) for a, b in windows)

    n_slots = {1: 0, 2: 3, 3: 4}[n_orders]
    shared = _BASE_WINDOWS + [_FOOD_SOLO_GAP] + _LATE_WINDOWS \
        + _PAIR_SLOTS[:n_slots]
    ring1 = _BASE_WINDOWS + [_RING1_BRIDGE] + _LATE_WINDOWS \
        + _PAIR_SLOTS[:n_slots]
    signals = {"food": plain(shared), "ring1": rippled(ring1)}
    if n_orders >= 2:
        ring2 = [(_SECOND_ORDER_START, _LATE_WINDOWS[-1][1])] \
            + _PAIR_SLOTS[:n_slots]
        signals["ring2"] = rippled(ring2)
    if n_orders >= 3:
        signals["ring3"] = rippled(_PAIR_SLOTS[2:4])
    return StimulusSchedule(signals)
