"""Image association on a 20x20 memristor array.

Training compares each teacher pixel against the input image under a
configurable match predicate and scope, turns the match count into a
modulation voltage V = v_min + (v_max - v_min) * count / scope_size, and
pulses the corresponding array cell with that voltage.  Cells whose
voltage clears the device's set threshold drift toward low resistance;
the rest stay put, so after a handful of pairs the array's normalized
state map approaches the inverse of the teacher's binary pattern
(learned pixels read 0, background reads 1).

Inference reads the state map, scores a probe image by the mean squared
difference between the map and the inverted binary probe (0 = perfect
match), and commits the verdict to a separate label device: scores below
the threshold drive a set pulse (low resistance, label "cat"), others a
reset pulse (high resistance, label "non-cat").

Cell updates are independent; the vectorized stepper reproduces the
scalar device semantics bit for bit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .device import DeviceParams, DeviceState, resistance, step
from .errors import DataError, InvalidInputError

__all__ = [
    "GRID_SIDE",
    "LABEL_POSITIVE",
    "LABEL_NEGATIVE",
    "TrainConfig",
    "InferConfig",
    "ArrayState",
    "ClassifyResult",
    "new_array",
    "load_image",
    "read_image_csv",
    "read_image_pgm",
    "binarize",
    "match_counts",
    "modulation_voltages",
    "train_pair",
    "train_many",
    "state_grid",
    "similarity",
    "midpoint_threshold",
    "classify",
    "write_state_csv",
]

GRID_SIDE = 20
LABEL_POSITIVE = "cat"      # label-device set  -> low resistance
LABEL_NEGATIVE = "non-cat"  # label-device reset -> high resistance

_PREDICATES = ("equal-binary", "abs-diff")
_SCOPES = ("all-vector", "corresponding")


@dataclass(frozen=True)
class TrainConfig:
    """Count-to-voltage training rule for one pulse per (input, teacher) pair."""

    binarize_threshold: float = 0.5
    predicate: str = "equal-binary"
    tau: float = 0.1              # tolerance of the abs-diff predicate
    scope: str = "all-vector"
    v_min: float = 0.0            # V at count 0
    v_max: float = 0.35           # V at full count
    pulse_dt: float = 0.05        # s, pulse length per pair
    dt: float = 1e-4              # s, integration step

    def __post_init__(self) -> None:
        if not 0.0 < self.binarize_threshold < 1.0:
            raise InvalidInputError(
                f"binarize threshold must lie in (0,1), got {self.binarize_threshold!r}")
        if self.predicate not in _PREDICATES:
            raise InvalidInputError(
                f"match predicate must be one of {_PREDICATES}, got {self.predicate!r}")
        if self.scope not in _SCOPES:
            raise InvalidInputError(
                f"match scope must be one of {_SCOPES}, got {self.scope!r}")
        if self.tau < 0.0 or not math.isfinite(self.tau):
            raise InvalidInputError(f"tau must be >= 0, got {self.tau!r}")
        if not self.v_min < self.v_max:
            raise InvalidInputError(
                f"need v_min < v_max, got {self.v_min!r} >= {self.v_max!r}")
        if self.pulse_dt <= 0.0 or self.dt <= 0.0 or self.dt > self.pulse_dt:
            raise InvalidInputError(
                f"need 0 < dt <= pulse_dt, got dt={self.dt!r}, pulse_dt={self.pulse_dt!r}")


@dataclass(frozen=True)
class InferConfig:
    """Similarity threshold and label-device drive for classification."""

    similarity_threshold: float
    label_device: DeviceParams = field(default_factory=DeviceParams)
    label_learn_v: float = 0.35
    label_forget_v: float = -0.2
    label_pulse_s: float = 0.25
    label_boundary_ohm: float = 50e3   # resistance separating the two labels
    dt: float = 1e-4

    def __post_init__(self) -> None:
        if not 0.0 < self.similarity_threshold < 1.0:
            raise InvalidInputError(
                "similarity threshold must lie in (0,1), "
                f"got {self.similarity_threshold!r}")
        if not (self.label_device.r_on < self.label_boundary_ohm
                < self.label_device.r_off):
            raise InvalidInputError(
                "label boundary must lie strictly between r_on and r_off, "
                f"got {self.label_boundary_ohm!r}")
        if self.label_learn_v <= self.label_device.v_on:
            raise InvalidInputError(
                f"label_learn_v must exceed v_on={self.label_device.v_on}, "
                f"got {self.label_learn_v!r}")
        if self.label_forget_v >= self.label_device.v_off:
            raise InvalidInputError(
                f"label_forget_v must lie below v_off={self.label_device.v_off}, "
                f"got {self.label_forget_v!r}")
        if self.label_pulse_s <= 0.0 or self.dt <= 0.0:
            raise InvalidInputError("label pulse and dt must be positive")


@dataclass(frozen=True)
class ArrayState:
    """Shared device parameters plus the per-cell state grid."""

    params: DeviceParams
    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2:
            raise InvalidInputError(f"cell grid must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("cell states must be finite")
        if w.min() < self.params.w_on or w.max() > self.params.w_off:
            raise InvalidInputError("cell states must lie within device bounds")
        object.__setattr__(self, "w", w)


def new_array(params: DeviceParams | None = None,
              side: int = GRID_SIDE) -> ArrayState:
    """Fresh array with every cell fully reset (high resistance)."""
    params = params or DeviceParams()
    return ArrayState(params, np.full((side, side), params.w_on))


# --- image ingestion -------------------------------------------------------

def _normalize_intensities(raw: np.ndarray, origin: str) -> np.ndarray:
    if raw.size == 0 or not np.all(np.isfinite(raw)):
        raise DataError(f"{origin}: image entries must be finite and non-empty")
    if raw.min() < 0.0:
        raise DataError(f"{origin}: negative intensity {raw.min()!r}")
    # 8-bit ranges are detected by magnitude; unit-range data passes through
    if raw.max() > 1.0:
        if raw.max() > 255.0:
            raise DataError(f"{origin}: intensity {raw.max()!r} exceeds 255")
        return raw / 255.0
    return raw


def read_image_csv(path: str | Path) -> np.ndarray:
    """Rectangular grid of comma-separated intensities, any size."""
    path = Path(path)
    rows: list[list[float]] = []
    try:
        for ln, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError as exc:
                raise DataError(f"{path.name}:{ln}: {exc}") from exc
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path.name}: empty image")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path.name}: ragged rows (widths {sorted(widths)})")
    return _normalize_intensities(np.array(rows, dtype=float), path.name)


def read_image_pgm(path: str | Path) -> np.ndarray:
    """Grayscale PGM, ASCII (P2) or binary (P5) with maxval <= 255."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4 and pos < len(blob):
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)").match(blob, pos)
        if m is None:
            break
        tokens.append(m.group(1))
        pos = m.end()
    if len(tokens) < 4 or tokens[0] not in (b"P2", b"P5"):
        raise DataError(f"{path.name}: not a P2/P5 PGM")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise DataError(f"{path.name}: bad PGM header") from exc
    if width <= 0 or height <= 0 or not 0 < maxval <= 255:
        raise DataError(f"{path.name}: unsupported PGM geometry "
                        f"{width}x{height} maxval {maxval}")
    n = width * height
    if tokens[0] == b"P5":
        data = blob[pos + 1: pos + 1 + n]  # single whitespace after maxval
        if len(data) != n:
            raise DataError(f"{path.name}: truncated PGM payload")
        flat = np.frombuffer(data, dtype=np.uint8).astype(float)
    else:
        try:
            flat = np.array([float(t) for t in blob[pos:].split()], dtype=float)
        except ValueError as exc:
            raise DataError(f"{path.name}: bad PGM sample") from exc
        if flat.size != n:
            raise DataError(f"{path.name}: expected {n} samples, got {flat.size}")
    if flat.size and flat.max() > maxval:
        raise DataError(f"{path.name}: sample exceeds maxval {maxval}")
    return flat.reshape(height, width) / float(maxval)


def _box_resize(img: np.ndarray, side: int) -> np.ndarray:
    """Center-crop to square, then box-filter down to side x side."""
    h, w = img.shape
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    square = img[top: top + s, left: left + s]
    # average source pixels whose index falls in each destination bin
    edges = np.linspace(0, s, side + 1)
    starts = np.floor(edges[:-1]).astype(int)
    stops = np.ceil(edges[1:]).astype(int)
    out = np.empty((side, side))
    for i in range(side):
        for j in range(side):
            out[i, j] = square[starts[i]:stops[i], starts[j]:stops[j]].mean()
    return out


def load_image(path: str | Path, side: int = GRID_SIDE,
               allow_resize: bool = False) -> np.ndarray:
    """Image as a side x side grid of intensities in [0, 1].

    CSV and PGM inputs are dispatched on the file suffix.  Larger images
    are center-cropped and box-filtered down only when `allow_resize` is
    set; any other shape mismatch is an error naming the dimensions.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".csv":
        img = read_image_csv(path)
    elif suffix == ".pgm":
        img = read_image_pgm(path)
    else:
        raise DataError(f"{path.name}: unsupported image format {suffix!r}")
    if img.shape == (side, side):
        return img
    if allow_resize and img.shape[0] >= side and img.shape[1] >= side:
        return _box_resize(img, side)
    raise DataError(
        f"{path.name}: image is {img.shape[0]}x{img.shape[1]}, "
        f"expected {side}x{side}"
        + ("" if allow_resize else " (resizing not enabled)"))


# --- training --------------------------------------------------------------

def binarize(img: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Intensities mapped to {0, 1} by >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must lie in (0,1), got {threshold!r}")
    return (np.asarray(img, dtype=float) >= threshold).astype(float)


def match_counts(input_img: np.ndarray, teacher_img: np.ndarray,
                 cfg: TrainConfig) -> tuple[np.ndarray, int]:
    """Per-teacher-pixel match counts and the scope size normalizing them.

    all-vector scope compares each teacher pixel against every input
    entry (scope size = number of pixels); corresponding scope compares
    position-wise (scope size = 1, counts in {0, 1}).
    """
    inp = np.asarray(input_img, dtype=float)
    tea = np.asarray(teacher_img, dtype=float)
    if inp.shape != tea.shape:
        raise InvalidInputError(
            f"input {inp.shape} and teacher {tea.shape} shapes differ")
    if cfg.predicate == "equal-binary":
        inp = binarize(inp, cfg.binarize_threshold)
        tea = binarize(tea, cfg.binarize_threshold)
        if cfg.scope == "corresponding":
            counts = (inp == tea).astype(float)
            return counts, 1
        ones = float(np.sum(inp == 1.0))
        counts = np.where(tea == 1.0, ones, inp.size - ones)
        return counts, inp.size
    # abs-diff predicate on raw intensities
    if cfg.scope == "corresponding":
        counts = (np.abs(inp - tea) <= cfg.tau).astype(float)
        return counts, 1
    counts = np.array([[np.sum(np.abs(inp - t) <= cfg.tau) for t in row]
                       for row in tea], dtype=float)
    return counts, inp.size


def modulation_voltages(counts: np.ndarray, scope_n: int,
                        v_min: float, v_max: float) -> np.ndarray:
    """V = v_min + (v_max - v_min) * count / scope_n, elementwise."""
    if scope_n <= 0:
        raise InvalidInputError(f"scope size must be positive, got {scope_n!r}")
    counts = np.asarray(counts, dtype=float)
    if counts.min() < 0 or counts.max() > scope_n:
        raise InvalidInputError("counts must lie in [0, scope size]")
    return v_min + (v_max - v_min) * counts / scope_n


def _step_grid(params: DeviceParams, w: np.ndarray, v: np.ndarray,
               dt: float) -> np.ndarray:
    """One Euler step over the whole grid; scalar-step semantics cellwise."""
    rate = np.zeros_like(w)
    setting = v >= params.v_on
    if setting.any():
        drive = params.k_on * (v[setting] / params.v_on - 1.0) ** params.alpha_on
        rate[setting] = np.where(w[setting] >= params.w_off, 0.0, drive)
    resetting = v <= params.v_off
    if resetting.any():
        drive = params.k_off * (v[resetting] / params.v_off - 1.0) ** params.alpha_off
        rate[resetting] = np.where(w[resetting] <= params.w_on, 0.0, drive)
    return np.clip(w + rate * dt, params.w_on, params.w_off)


def train_pair(array: ArrayState, input_img: np.ndarray,
               teacher_img: np.ndarray, cfg: TrainConfig) -> ArrayState:
    """One modulation pulse derived from a single (input, teacher) pair."""
    if cfg.v_max <= array.params.v_on:
        raise InvalidInputError(
            f"v_max={cfg.v_max!r} cannot reach the set threshold "
            f"v_on={array.params.v_on!r}")
    if np.asarray(teacher_img).shape != array.w.shape:
        raise InvalidInputError(
            f"teacher shape {np.asarray(teacher_img).shape} does not match "
            f"array shape {array.w.shape}")
    counts, scope_n = match_counts(input_img, teacher_img, cfg)
    volts = modulation_voltages(counts, scope_n, cfg.v_min, cfg.v_max)
    w = array.w
    for _ in range(int(round(cfg.pulse_dt / cfg.dt))):
        w = _step_grid(array.params, w, volts, cfg.dt)
    return replace(array, w=w)


def train_many(array: ArrayState, inputs: Sequence[np.ndarray],
               teacher_img: np.ndarray, cfg: TrainConfig) -> ArrayState:
    """Fold `train_pair` over the inputs in order."""
    for img in inputs:
        array = train_pair(array, img, teacher_img, cfg)
    return array


# --- inference -------------------------------------------------------------

def state_grid(array: ArrayState) -> np.ndarray:
    """Normalized state per cell: 0 at low resistance, 1 at high."""
    span = array.params.w_off - array.params.w_on
    return (array.params.w_off - array.w) / span


def similarity(state: np.ndarray, img: np.ndarray,
               binarize_threshold: float = 0.5) -> float:
    """Mean squared difference between the state map and the inverted
    binary image; 0 means the array encodes exactly this pattern."""
    state = np.asarray(state, dtype=float)
    target = 1.0 - binarize(img, binarize_threshold)
    if state.shape != target.shape:
        raise InvalidInputError(
            f"state {state.shape} and image {target.shape} shapes differ")
    return float(np.mean((state - target) ** 2))


def midpoint_threshold(scores_a: Sequence[float],
                       scores_b: Sequence[float]) -> float:
    """Decision threshold halfway between two score-cluster means."""
    a, b = np.asarray(scores_a, float), np.asarray(scores_b, float)
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("both calibration clusters must be non-empty")
    return float((a.mean() + b.mean()) / 2.0)


@dataclass(frozen=True)
class ClassifyResult:
    label: str
    label_resistance: float
    score: float


def classify(array: ArrayState, img: np.ndarray, cfg: InferConfig,
             binarize_threshold: float = 0.5) -> ClassifyResult:
    """Score a probe image and commit the verdict to a label device.

    Scores below the threshold drive the label device with the learning
    voltage (sets to low resistance); others get the forgetting voltage.
    The returned label reads the final resistance against the configured
    boundary (50 kOhm by default).
    """
    score = similarity(state_grid(array), img, binarize_threshold)
    drive = (cfg.label_learn_v if score < cfg.similarity_threshold
             else cfg.label_forget_v)
    state = DeviceState(cfg.label_device.w_on)
    for _ in range(int(round(cfg.label_pulse_s / cfg.dt))):
        state = step(cfg.label_device, state, drive, cfg.dt)
    r = resistance(cfg.label_device, state.w)
    label = LABEL_POSITIVE if r < cfg.label_boundary_ohm else LABEL_NEGATIVE
    return ClassifyResult(label=label, label_resistance=r, score=score)


def write_state_csv(state: np.ndarray, path: str | Path) -> None:
    """Normalized state grid, one CSV row per array row."""
    with Path(path).open("w", newline="") as fh:
        for row in np.asarray(state, dtype=float):
            fh.write(",".join(f"{x:.10g}" for x in row) + "\n")
