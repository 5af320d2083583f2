"""Synthetic 2 x 10 x 10 tactile frames for electrode misalignment.

Contact model (invented; only the sensor's 1-9 N range and 10 x 10 grid over
5.8 cm^2 are real numbers):

* nominal contact is a full-width band on rows 4-5 pressing 5 N on both
  sensors;
* a tilt of ``phi`` degrees adds a linear ramp across columns, rising on one
  sensor and falling on the other; at 5 degrees the ramp spans 1..9 N;
* ``dy`` moves the band up by ``dy / pitch`` rows (row 0 is the top edge);
* ``dx`` slides the contact patch sideways, so ``dx / pitch`` columns on the
  trailing side lose contact.

Noise is Gaussian; afterwards forces are capped at 9 N and anything below
the 1 N sensing floor reads as zero.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange, ShapeMismatch

CHANNELS, ROWS, COLS = 2, 10, 10
FRAME_SHAPE = (CHANNELS, ROWS, COLS)
FORCE_FLOOR_N = 1.0
FORCE_MAX_N = 9.0
NOMINAL_FORCE_N = 5.0
BAND_ROWS = (4, 5)
TAXEL_PITCH_MM = math.sqrt(580.0) / 10.0  # 5.8 cm^2 = 580 mm^2 over 10 x 10
MAX_PHI_DEG = 5.0
MAX_SHIFT_MM = 10.0

ANGLE_CLASSES_DEG = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
OFFSET_CLASSES_MM = (-10.0, -5.0, 0.0, 5.0, 10.0)
TRAIN_FRACTION = 0.67
DEFAULT_NOISE_N = 0.4


class Kind(str, enum.Enum):
    ANGULAR = "angular"
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"

    @classmethod
    def parse(cls, value) -> Kind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown misalignment kind {value!r}") from None

    @property
    def class_values(self) -> tuple[float, ...]:
        return ANGLE_CLASSES_DEG if self is Kind.ANGULAR else OFFSET_CLASSES_MM

    @property
    def n_classes(self) -> int:
        return len(self.class_values)


@dataclass(frozen=True)
class MisalignmentLabel:
    kind: Kind
    class_index: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if not 0 <= self.class_index < self.kind.n_classes:
            raise ValueError(f"class_index {self.class_index} invalid for {self.kind.value}")

    @property
    def value(self) -> float:
        """Angle in degrees (angular) or offset in millimetres."""
        return self.kind.class_values[self.class_index]


class TactileFrame:
    """Pressure readings of both sensors, Newtons, shape (2, 10, 10)."""

    __slots__ = ("pressure",)

    def __init__(self, pressure):
        p = np.array(pressure, dtype=float)
        if p.shape != FRAME_SHAPE:
            raise ShapeMismatch(f"tactile frame must be {FRAME_SHAPE}, got {p.shape}")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > FORCE_MAX_N:
            raise ValueError("tactile forces must lie in [0, 9] N")
        p.setflags(write=False)
        self.pressure = p

    def __eq__(self, other):
        return isinstance(other, TactileFrame) and np.array_equal(self.pressure, other.pressure)

    def __repr__(self):
        return f"TactileFrame(max={self.pressure.max():.3f} N)"


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def row_shift(dy_mm: float) -> int:
    """Band displacement in rows, positive meaning towards row 0."""
    return _round_half_away(dy_mm / TAXEL_PITCH_MM)


def col_shift(dx_mm: float) -> int:
    return _round_half_away(dx_mm / TAXEL_PITCH_MM)


def base_pattern(phi: float, dx: float = 0.0, dy: float = 0.0) -> np.ndarray:
    """Noise-free, unclamped force map. Accepts negative ``phi`` for testing
    the mirror symmetry of the model."""
    cols = np.arange(COLS, dtype=float) - 4.5
    # ramp written as one product over 45 so that phi = 5 hits 1 N and 9 N exactly
    ramp = (8.0 * phi * cols) / 45.0
    out = np.zeros(FRAME_SHAPE)
    rs = row_shift(dy)
    rows = [r - rs for r in BAND_ROWS]
    cs = col_shift(dx)
    support = np.zeros(COLS, dtype=bool)
    lo, hi = max(0, cs), min(COLS, COLS + cs)
    support[lo:hi] = True
    for r in rows:
        if 0 <= r < ROWS:
            out[0, r, support] = (NOMINAL_FORCE_N + ramp)[support]
            out[1, r, support] = (NOMINAL_FORCE_N - ramp)[support]
    return out


def clamp(forces: np.ndarray) -> np.ndarray:
    f = np.minimum(forces, FORCE_MAX_N)
    return np.where(f < FORCE_FLOOR_N, 0.0, f)


def synthesize(kind, phi: float = 0.0, dx: float = 0.0, dy: float = 0.0,
               noise_sigma: float = DEFAULT_NOISE_N,
               rng: np.random.Generator | None = None) -> TactileFrame:
    """One tactile frame for the given misalignment.

    ``kind`` only documents which dataset the frame belongs to; the pattern
    itself depends on ``phi``, ``dx`` and ``dy``.
    """
    Kind.parse(kind)
    if not 0.0 <= phi <= MAX_PHI_DEG:
        raise OutOfRange(f"phi={phi} deg outside [0, {MAX_PHI_DEG}]")
    if abs(dx) > MAX_SHIFT_MM or abs(dy) > MAX_SHIFT_MM:
        raise OutOfRange(f"offset ({dx}, {dy}) mm beyond +/-{MAX_SHIFT_MM} mm")
    f = base_pattern(phi, dx, dy)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("rng required when noise_sigma > 0")
        f = f + rng.normal(0.0, noise_sigma, FRAME_SHAPE)
    return TactileFrame(clamp(f))


def stratified_split(labels, split_seed: int, train_fraction: float = TRAIN_FRACTION) -> np.ndarray:
    """Boolean train mask with ``round(train_fraction * n_c)`` picks per class."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(split_seed)
    mask = np.zeros(len(labels), dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n_train = _round_half_away(train_fraction * len(idx))
        mask[rng.permutation(idx)[:n_train]] = True
    return mask


@dataclass
class TactileDataset:
    kind: Kind
    frames: np.ndarray  # (N, 2, 10, 10)
    labels: np.ndarray  # (N,) class indices
    split_seed: int
    noise_sigma: float = DEFAULT_NOISE_N
    train_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        self.frames = np.asarray(self.frames, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.frames.ndim != 4 or self.frames.shape[1:] != FRAME_SHAPE:
            raise ShapeMismatch(f"frames must be (N, 2, 10, 10), got {self.frames.shape}")
        if len(self.frames) != len(self.labels):
            raise ValueError("frames and labels differ in length")
        if self.train_mask is None:
            self.train_mask = stratified_split(self.labels, self.split_seed)
        self.train_mask = np.asarray(self.train_mask, dtype=bool)

    def __len__(self):
        return len(self.labels)

    @property
    def samples(self) -> list[tuple[TactileFrame, MisalignmentLabel]]:
        return [(TactileFrame(f), MisalignmentLabel(self.kind, int(c)))
                for f, c in zip(self.frames, self.labels)]

    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.frames[self.train_mask], self.labels[self.train_mask]

    def validation(self) -> tuple[np.ndarray, np.ndarray]:
        m = ~self.train_mask
        return self.frames[m], self.labels[m]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.kind.n_classes)

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": "mobilecharger.tactile",
            "version": 1,
            "kind": self.kind.value,
            "split_seed": int(self.split_seed),
            "noise_sigma": float(self.noise_sigma),
            "samples": [
                {"class": int(c), "train": bool(t), "pressure": f.ravel().tolist()}
                for f, c, t in zip(self.frames, self.labels, self.train_mask)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> TactileDataset:
        s = doc["samples"]
        frames = np.array([x["pressure"] for x in s], dtype=float).reshape((-1,) + FRAME_SHAPE)
        return cls(doc["kind"], frames, [x["class"] for x in s], doc["split_seed"],
                   doc.get("noise_sigma", DEFAULT_NOISE_N),
                   np.array([x["train"] for x in s], dtype=bool))

    def write_csv(self, path) -> None:
        write_frames_csv(path, self.kind, self.frames, self.labels)

    @classmethod
    def read_csv(cls, path, split_seed: int = 0) -> TactileDataset:
        kinds, frames, labels = read_frames_csv(path)
        if len(set(kinds)) > 1:
            raise ValueError(f"mixed kinds in {path}: {sorted(set(kinds))}")
        if not kinds:
            raise ValueError(f"{path} holds no samples")
        return cls(kinds[0], frames, labels, split_seed)

    def save(self, path) -> None:
        if str(path).endswith(".csv"):
            self.write_csv(path)
        else:
            with open(path, "w") as fh:
                json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path, split_seed: int = 0) -> TactileDataset:
        if str(path).endswith(".csv"):
            return cls.read_csv(path, split_seed)
        with open(path) as fh:
            return cls.from_json(json.load(fh))


CSV_HEADER = ["kind", "class"] + [f"f{i:03d}" for i in range(CHANNELS * ROWS * COLS)]


def write_frames_csv(path_or_file, kind, frames, labels) -> None:
    """CSV layout: kind, class, then 200 forces in (channel, row, col) order."""
    kind = Kind.parse(kind)
    if hasattr(path_or_file, "write"):
        _write_rows(path_or_file, kind, frames, labels)
        return
    with open(path_or_file, "w", newline="") as fh:
        _write_rows(fh, kind, frames, labels)


def _write_rows(fh, kind: Kind, frames, labels) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for f, c in zip(frames, labels):
        w.writerow([kind.value, int(c)] + [repr(float(v)) for v in np.ravel(f)])


def read_frames_csv(path):
    kinds, frames, labels = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected tactile CSV header")
        for row in r:
            if len(row) != len(CSV_HEADER):
                raise ShapeMismatch(f"{path}: row with {len(row) - 2} forces, expected 200")
            kinds.append(Kind.parse(row[0]))
            labels.append(int(row[1]) if row[1] != "" else -1)
            frames.append(np.array([float(v) for v in row[2:]]).reshape(FRAME_SHAPE))
    return kinds, np.array(frames).reshape((-1,) + FRAME_SHAPE), np.array(labels, dtype=int)


def misalignment_for(kind: Kind, class_index: int, nuisance_index: int = 0):
    """(phi, dx, dy) for a class; translational datasets sweep the other
    axis over the same 5 mm grid so all 25 docking targets appear."""
    v = kind.class_values[class_index]
    other = OFFSET_CLASSES_MM[nuisance_index % len(OFFSET_CLASSES_MM)]
    if kind is Kind.ANGULAR:
        return v, 0.0, 0.0
    if kind is Kind.VERTICAL:
        return 0.0, other, v
    return 0.0, v, other


def generate_dataset(kind, n_per_class: int = 100, noise_sigma: float = DEFAULT_NOISE_N,
                     seed: int = 0) -> TactileDataset:
    kind = Kind.parse(kind)
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    frames, labels = [], []
    for c in range(kind.n_classes):
        for i in range(n_per_class):
            phi, dx, dy = misalignment_for(kind, c, i)
            frames.append(synthesize(kind, phi, dx, dy, noise_sigma, rng).pressure)
            labels.append(c)
    return TactileDataset(kind, np.array(frames), np.array(labels), seed, noise_sigma)
