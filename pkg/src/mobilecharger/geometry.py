"""3D points, rigid transforms and the camera -> DeltaCharger frame change.

All lengths are centimeters. Angles are degrees at the API boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CAMERA_PITCH_DEG = -50.0
CAMERA_Y_OFFSET_CM = -19.0

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite component in {self!r}")

    @classmethod
    def from_array(cls, a) -> Vec3:
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


class RigidTransform:
    """Rotation followed by translation: ``p -> R @ p + t``.

    The rotation is checked for orthonormality and unit determinant when the
    transform is built, never when it is applied.
    """

    __slots__ = ("_R", "_t")

    def __init__(self, rotation, translation: Vec3 | None = None):
        R = np.array(rotation, dtype=float)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if np.max(np.abs(R.T @ R - np.eye(3))) >= _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation has det != 1")
        R.setflags(write=False)
        self._R = R
        self._t = translation if translation is not None else Vec3(0.0, 0.0, 0.0)

    @property
    def rotation(self) -> np.ndarray:
        return self._R

    @property
    def translation(self) -> Vec3:
        return self._t

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3))

    @classmethod
    def from_matrix(cls, m) -> RigidTransform:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], Vec3.from_array(m[:3, 3]))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self._R
        m[:3, 3] = self._t.as_array()
        return m

    def apply(self, p: Vec3) -> Vec3:
        return Vec3.from_array(self._R @ p.as_array() + self._t.as_array())

    def inverse(self) -> RigidTransform:
        Rt = self._R.T
        return RigidTransform(Rt, Vec3.from_array(-(Rt @ self._t.as_array())))

    def __repr__(self):
        return f"RigidTransform(rotation={self._R.tolist()}, translation={self._t})"


def apply(t: RigidTransform, p: Vec3) -> Vec3:
    return t.apply(p)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``b`` first, then ``a``."""
    R = a.rotation @ b.rotation
    t = a.rotation @ b.translation.as_array() + a.translation.as_array()
    return RigidTransform(R, Vec3.from_array(t))


def rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def camera_transform(theta: float = CAMERA_PITCH_DEG,
                     l: float = CAMERA_Y_OFFSET_CM) -> RigidTransform:
    """Camera-to-DeltaCharger transform as a RigidTransform object."""
    return RigidTransform(rot_x(theta), Vec3(0.0, l, 0.0))


def camera_to_delta(p_cam: Vec3, theta: float = CAMERA_PITCH_DEG,
                    l: float = CAMERA_Y_OFFSET_CM) -> Vec3:
    """Map a camera-frame point into the DeltaCharger frame.

    The camera is pitched by ``theta`` degrees about the shared X axis and
    offset by ``l`` cm along Y. X passes through untouched.
    """
    th = math.radians(theta)
    c, s = math.cos(th), math.sin(th)
    return Vec3(
        p_cam.x,
        c * p_cam.y - s * p_cam.z + l,
        s * p_cam.y + c * p_cam.z,
    )


def delta_to_camera(p_delta: Vec3, theta: float = CAMERA_PITCH_DEG,
                    l: float = CAMERA_Y_OFFSET_CM) -> Vec3:
    th = math.radians(theta)
    c, s = math.cos(th), math.sin(th)
    y = p_delta.y - l
    return Vec3(p_delta.x, c * y + s * p_delta.z, -s * y + c * p_delta.z)
