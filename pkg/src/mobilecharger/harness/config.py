"""JSON configuration with every default embedded.

Sections mirror the subsystems: ``delta_geometry``, ``detector``, ``world``,
``search_timing``, ``tactile``, ``train`` and ``experiment``. A config file
only needs the keys it overrides; unknown sections or keys are rejected.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from ..classifier import DEFAULT_CRITICAL_ANGLE_DEG, TrainConfig
from ..delta_kin import DeltaGeometry, validate_workspace
from ..errors import ConfigError
from ..search import SearchTiming
from ..tactile import ANGLE_CLASSES_DEG, DEFAULT_NOISE_N, OFFSET_CLASSES_MM
from ..world import DetectorModel

DEFAULT_OMEGAS_DEG = (-20.0, -10.0, 0.0, 10.0, 20.0)


@dataclass(frozen=True)
class WorldConfig:
    distance_cm: float = 25.0
    stand_height_cm: float = 16.0
    delta_height_cm: float = 16.0

    def __post_init__(self):
        if self.distance_cm < 0 or self.stand_height_cm < 0:
            raise ValueError("distance_cm and stand_height_cm must be >= 0")


@dataclass(frozen=True)
class TactileConfig:
    noise_sigma: float = DEFAULT_NOISE_N
    n_per_class: int = 100
    dataset_seed: int = 0
    phi_choices: tuple = ANGLE_CLASSES_DEG
    offset_choices: tuple = OFFSET_CLASSES_MM

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        object.__setattr__(self, "phi_choices", tuple(float(v) for v in self.phi_choices))
        object.__setattr__(self, "offset_choices", tuple(float(v) for v in self.offset_choices))
        if not self.phi_choices or not self.offset_choices:
            raise ValueError("misalignment choice lists must not be empty")


@dataclass(frozen=True)
class ExperimentConfig:
    omegas: tuple = DEFAULT_OMEGAS_DEG
    trials_per_omega: int = 20
    master_seed: int = 2021
    critical_angle_deg: float = DEFAULT_CRITICAL_ANGLE_DEG
    classify: bool = True
    # optional paths to pre-trained model JSON; missing kinds are trained on the fly
    models: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(v) for v in self.omegas))
        if not self.omegas:
            raise ValueError("omegas must not be empty")
        if self.trials_per_omega < 1:
            raise ValueError("trials_per_omega must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        bad = set(self.models) - {"angular", "vertical", "horizontal"}
        if bad:
            raise ValueError(f"unknown model kinds {sorted(bad)}")


SECTIONS = {
    "delta_geometry": DeltaGeometry,
    "detector": DetectorModel,
    "world": WorldConfig,
    "search_timing": SearchTiming,
    "tactile": TactileConfig,
    "train": TrainConfig,
    "experiment": ExperimentConfig,
}


@dataclass(frozen=True)
class Config:
    delta_geometry: DeltaGeometry = field(default_factory=DeltaGeometry)
    detector: DetectorModel = field(default_factory=DetectorModel)
    world: WorldConfig = field(default_factory=WorldConfig)
    search_timing: SearchTiming = field(default_factory=SearchTiming)
    tactile: TactileConfig = field(default_factory=TactileConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        return out

    def replace(self, **sections) -> Config:
        return dataclasses.replace(self, **sections)

    def with_seed(self, seed: int) -> Config:
        return self.replace(
            experiment=dataclasses.replace(self.experiment, master_seed=seed))


def from_dict(doc: dict, validate: bool = True) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    built = {}
    for name, cls in SECTIONS.items():
        values = doc.get(name, {})
        if not isinstance(values, dict):
            raise ConfigError(f"section {name!r} must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(values) - known
        if extra:
            raise ConfigError(f"unknown keys in {name!r}: {sorted(extra)}")
        try:
            built[name] = cls(**values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {name!r} section: {exc}") from exc
    cfg = Config(**built)
    if validate:
        validate_workspace(cfg.delta_geometry)
    return cfg


def load(path) -> Config:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_dict(doc)


def default_config() -> Config:
    return Config()


def dumps_default() -> str:
    return json.dumps(default_config().to_dict(), indent=2)
