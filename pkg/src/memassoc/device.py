"""Behavioral model of a voltage-threshold memristor.

The device carries a single internal state variable w confined to
[w_on, w_off].  Voltage beyond either threshold moves the state at a
power-law rate; between the thresholds the state holds (dead zone):

    dw/dt = k_on * (v / v_on - 1)^alpha_on   for v >= v_on   (v_on  > 0)
    dw/dt = 0                                for v_off < v < v_on
    dw/dt = k_off * (v / v_off - 1)^alpha_off for v <= v_off  (v_off < 0)

Sign convention: k_on > 0, so positive over-threshold drive raises w
toward w_off, and the resistance map is oriented so that w = w_off is the
low-resistance (fully set) end:

    R(w) = r_on * (r_off / r_on)^((w_off - w) / (w_off - w_on))

Rate windows are rectangular: the rate is unmodified strictly inside the
state bounds and zero at the bound the drive pushes toward; `step` clamps
after each explicit-Euler update, so w can never leave its bounds.

Exact threshold equality (v == v_on or v == v_off) gives zero rate because
the over-threshold factor vanishes; with the default unit exponents the
rate is therefore continuous across the dead-zone edges.

Units: volts, ohms, seconds, watts; w is dimensionless.  All functions are
pure and all types immutable, so values can be shared freely across
threads and processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError

__all__ = [
    "DeviceParams",
    "DeviceState",
    "drift_rate",
    "resistance",
    "normalized_state",
    "step",
    "power",
]


@dataclass(frozen=True)
class DeviceParams:
    """Switching parameters.  Defaults describe the reference device."""

    r_on: float = 20e3        # ohm, low-resistance bound (fully set)
    r_off: float = 190e3      # ohm, high-resistance bound (fully reset)
    alpha_on: float = 1.0     # set-rate exponent
    alpha_off: float = 1.0    # reset-rate exponent
    k_on: float = 2.82        # 1/s, set-rate scale, > 0
    k_off: float = -18.33     # 1/s, reset-rate scale, < 0
    v_on: float = 0.14        # V, positive threshold
    v_off: float = -0.16      # V, negative threshold
    w_on: float = 0.0         # state bound reached by sustained reset
    w_off: float = 1.0        # state bound reached by sustained set

    def __post_init__(self) -> None:
        for name in ("r_on", "r_off", "alpha_on", "alpha_off", "k_on",
                     "k_off", "v_on", "v_off", "w_on", "w_off"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if not 0.0 < self.r_on < self.r_off:
            raise InvalidInputError(
                f"resistance bounds need 0 < r_on < r_off, "
                f"got r_on={self.r_on!r}, r_off={self.r_off!r}")
        if not self.v_off < 0.0 < self.v_on:
            raise InvalidInputError(
                "v_on must be positive and v_off negative, "
                f"got v_on={self.v_on!r}, v_off={self.v_off!r}")
        if self.k_on <= 0.0:
            raise InvalidInputError(f"k_on must be > 0, got {self.k_on!r}")
        if self.k_off >= 0.0:
            raise InvalidInputError(f"k_off must be < 0, got {self.k_off!r}")
        if self.alpha_on <= 0.0 or self.alpha_off <= 0.0:
            raise InvalidInputError("rate exponents must be > 0")
        if not self.w_on < self.w_off:
            raise InvalidInputError(
                f"state bounds need w_on < w_off, "
                f"got w_on={self.w_on!r}, w_off={self.w_off!r}")


@dataclass(frozen=True)
class DeviceState:
    """Internal state snapshot; `step` keeps w inside [w_on, w_off]."""

    w: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.w):
            raise InvalidInputError(f"state w must be finite, got {self.w!r}")


def drift_rate(params: DeviceParams, w: float, v: float) -> float:
    """State velocity dw/dt in 1/s at state w under voltage v.

    Zero in the dead zone and at the bound the drive pushes toward
    (rectangular window).
    """
    if not (math.isfinite(w) and math.isfinite(v)):
        raise InvalidInputError(f"non-finite drift input: w={w!r}, v={v!r}")
    if v >= params.v_on:
        if w >= params.w_off:
            return 0.0
        return params.k_on * (v / params.v_on - 1.0) ** params.alpha_on
    if v <= params.v_off:
        if w <= params.w_on:
            return 0.0
        return params.k_off * (v / params.v_off - 1.0) ** params.alpha_off
    return 0.0


def resistance(params: DeviceParams, w: float) -> float:
    """Resistance in ohms at state w (expects w within its bounds).

    Exponential interpolation with R(w_off) = r_on and R(w_on) = r_off.
    """
    if not math.isfinite(w):
        raise InvalidInputError(f"state w must be finite, got {w!r}")
    frac = (params.w_off - w) / (params.w_off - params.w_on)
    return params.r_on * (params.r_off / params.r_on) ** frac


def normalized_state(params: DeviceParams, w: float) -> float:
    """Normalized state n in [0, 1]: 0 fully set (r_on), 1 fully reset.

    Equals (w_off - w) / (w_off - w_on), which coincides with
    log(R / r_on) / log(r_off / r_on) under the resistance map.
    """
    if not math.isfinite(w):
        raise InvalidInputError(f"state w must be finite, got {w!r}")
    return (params.w_off - w) / (params.w_off - params.w_on)


def step(params: DeviceParams, state: DeviceState, v: float,
         dt: float) -> DeviceState:
    """One explicit-Euler update over dt seconds, clamped to state bounds."""
    if not (math.isfinite(v) and math.isfinite(dt)) or dt <= 0.0:
        raise InvalidInputError(f"need finite v and dt > 0, got v={v!r}, dt={dt!r}")
    w = state.w + dt * drift_rate(params, state.w, v)
    if w < params.w_on:
        w = params.w_on
    elif w > params.w_off:
        w = params.w_off
    return DeviceState(w)


def power(v: float, r: float) -> float:
    """Instantaneous dissipation v^2 / r in watts."""
    if not (math.isfinite(v) and math.isfinite(r)) or r <= 0.0:
        raise InvalidInputError(f"need finite v and r > 0, got v={v!r}, r={r!r}")
    return v * v / r
