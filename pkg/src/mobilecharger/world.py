"""Seedable planar scene: charger pose, electrode stand, and a noisy detector.

World frame: X/Y on the floor, Z up, centimeters. Yaw is measured from +Y
towards +X, so a charger with yaw 0 drives along +Y and yaw 90 along +X.

The DeltaCharger frame rides on the charger: X to the right, Y down, Z
forward (the direction the actuator pushes). The camera sits directly above
its origin and looks down-forward; see ``geometry.camera_to_delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AllHoles
from .geometry import CAMERA_PITCH_DEG, CAMERA_Y_OFFSET_CM, Vec3, delta_to_camera

LIGHTING_FACTORS = {"bright": 0.7, "normal": 1.0, "dark": 1.8}

# RealSense colour stream used on the robot is 840x480 (rows, cols below)
DEPTH_GRID_SHAPE = (480, 840)


def normalize_yaw(deg: float) -> float:
    """Wrap an angle into (-180, 180]."""
    a = math.fmod(deg, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))

    def heading(self) -> tuple[float, float]:
        r = math.radians(self.yaw)
        return math.sin(r), math.cos(r)


@dataclass(frozen=True)
class WorldState:
    """Static electrode stand plus the moving charger.

    ``delta_height`` is the height of the DeltaCharger frame origin above the
    floor; it is not published and defaults to the stand height so that the
    electrodes sit level with the actuator.
    """

    charger: Pose2
    electrode_pos: Vec3
    electrode_height: float = 16.0
    rng_seed: int = 0
    delta_height: float = 16.0

    def __post_init__(self):
        if self.electrode_height < 0:
            raise ValueError("electrode_height must be >= 0")

    def electrode_in_delta(self) -> Vec3:
        hx, hy = self.charger.heading()
        # right-hand vector is the heading rotated -90 deg about +Z
        rx, ry = hy, -hx
        vx = self.electrode_pos.x - self.charger.x
        vy = self.electrode_pos.y - self.charger.y
        return Vec3(vx * rx + vy * ry,
                    self.delta_height - self.electrode_pos.z,
                    vx * hx + vy * hy)

    def distance_to_electrode(self) -> float:
        """Planar distance between the charger reference point and the stand."""
        return math.hypot(self.electrode_pos.x - self.charger.x,
                          self.electrode_pos.y - self.charger.y)


def initial_world(omega: float, L: float, height: float = 16.0,
                  seed: int = 0, delta_height: float | None = None) -> WorldState:
    """Experiment layout: stand at distance ``L`` straight ahead of the
    origin, charger at the origin turned ``omega`` degrees away from it."""
    return WorldState(
        charger=Pose2(0.0, 0.0, omega),
        electrode_pos=Vec3(0.0, float(L), float(height)),
        electrode_height=float(height),
        rng_seed=seed,
        delta_height=float(height if delta_height is None else delta_height),
    )


@dataclass(frozen=True)
class DetectorModel:
    fov_halfangle: float = 35.0
    max_range: float = 40.0
    miss_prob: float = 0.4
    center_noise_sigma: float = 0.5
    lighting: str = "normal"
    camera_pitch: float = CAMERA_PITCH_DEG
    camera_offset: float = CAMERA_Y_OFFSET_CM

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError("miss_prob must lie in [0, 1]")
        if self.center_noise_sigma < 0:
            raise ValueError("center_noise_sigma must be >= 0")
        if self.lighting not in LIGHTING_FACTORS:
            raise ValueError(f"lighting must be one of {sorted(LIGHTING_FACTORS)}")

    @property
    def lighting_factor(self) -> float:
        return LIGHTING_FACTORS[self.lighting]

    @property
    def effective_miss_prob(self) -> float:
        return min(1.0, self.miss_prob * self.lighting_factor)


@dataclass(frozen=True)
class Observation:
    detected: bool
    bbox_center_cam: Vec3 | None = None
    distance: float | None = None


def electrode_in_camera(w: WorldState, d: DetectorModel) -> Vec3:
    return delta_to_camera(w.electrode_in_delta(), d.camera_pitch, d.camera_offset)


def visible(w: WorldState, d: DetectorModel) -> bool:
    """Geometric visibility: inside the FOV cone and within range."""
    p = electrode_in_camera(w, d)
    r = p.norm()
    if r == 0.0 or r > d.max_range:
        return False
    off_axis = math.degrees(math.acos(max(-1.0, min(1.0, p.z / r))))
    return off_axis <= d.fov_halfangle


def observe(w: WorldState, d: DetectorModel, rng: np.random.Generator) -> Observation:
    if not visible(w, d):
        return Observation(False)
    if rng.random() < d.effective_miss_prob:
        return Observation(False)
    p = electrode_in_camera(w, d)
    if d.center_noise_sigma > 0:
        p = Vec3.from_array(p.as_array() + rng.normal(0.0, d.center_noise_sigma, 3))
    return Observation(True, p, p.norm())


def rotate(w: WorldState, delta_yaw: float) -> WorldState:
    c = w.charger
    return replace(w, charger=Pose2(c.x, c.y, c.yaw + delta_yaw))


def advance(w: WorldState, dist: float) -> WorldState:
    if dist < 0:
        raise ValueError("advance distance must be >= 0")
    c = w.charger
    hx, hy = c.heading()
    return replace(w, charger=Pose2(c.x + dist * hx, c.y + dist * hy, c.yaw))


def nearest_valid_depth(depth, pixel: tuple[int, int]) -> tuple[int, int]:
    """Closest pixel (Euclidean, row-major tie break) with non-zero depth.

    Returns ``pixel`` itself when its own depth is valid.
    """
    grid = np.asarray(depth)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError("depth must be a non-empty 2D grid")
    r, c = int(pixel[0]), int(pixel[1])
    if grid[r, c] != 0:
        return r, c
    valid = grid != 0
    if not valid.any():
        raise AllHoles("depth grid has no valid pixel")
    rows, cols = np.indices(grid.shape)
    d2 = (rows - r) ** 2 + (cols - c) ** 2
    d2 = np.where(valid, d2, np.iinfo(d2.dtype).max)
    # argmin returns the first minimum in row-major order
    k = int(np.argmin(d2))
    return divmod(k, grid.shape[1])


def synthetic_depth_grid(rng: np.random.Generator, distance_cm: float,
                         hole_fraction: float = 0.05,
                         shape: tuple[int, int] = DEPTH_GRID_SHAPE) -> np.ndarray:
    """Flat depth image at ``distance_cm`` with a random fraction of holes."""
    grid = np.full(shape, float(distance_cm))
    grid[rng.random(shape) < hole_fraction] = 0.0
    return grid
