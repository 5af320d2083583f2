"""Closed-form kinematics of the inverted Delta (vDelta) docking actuator.

Frame: origin at the centre of the base ring, +Z pointing out of the robot
towards the counterpart's electrodes. Limb ``i`` sits at azimuth
``120 * i`` degrees. Joint angle zero means the proximal arm lies in the base
plane pointing radially outward; positive angles swing it towards +Z.

The link lengths are synthetic: no dimensions of the real mechanism are
published. The defaults are sized so that the whole 120 x 120 x 110 mm box
is reachable inside +/-90 degree servo travel.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoIntersection, Unreachable
from .geometry import Vec3

LIMB_AZIMUTHS_DEG = (0.0, 120.0, 240.0)


@dataclass(frozen=True)
class DeltaGeometry:
    base_radius: float = 8.0
    platform_radius: float = 4.0
    proximal_length: float = 10.0
    distal_length: float = 14.0
    workspace_xy_halfrange: float = 6.0
    workspace_z_range: tuple[float, float] = (4.0, 15.0)
    servo_limits: tuple[float, float] = (-90.0, 90.0)

    def __post_init__(self):
        for name in ("base_radius", "platform_radius", "proximal_length", "distal_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.distal_length > abs(self.base_radius - self.platform_radius):
            raise ValueError("distal_length must exceed |base_radius - platform_radius|")
        z_min, z_max = self.workspace_z_range
        if not z_min < z_max:
            raise ValueError("workspace_z_range must be increasing")
        lo, hi = self.servo_limits
        if not lo < hi:
            raise ValueError("servo_limits must be increasing")
        # tuples may arrive as lists from JSON
        object.__setattr__(self, "workspace_z_range", (float(z_min), float(z_max)))
        object.__setattr__(self, "servo_limits", (float(lo), float(hi)))

    @property
    def z_mid(self) -> float:
        return 0.5 * (self.workspace_z_range[0] + self.workspace_z_range[1])

    def box_corners(self) -> list[Vec3]:
        h = self.workspace_xy_halfrange
        return [Vec3(x, y, z) for x, y, z in
                itertools.product((-h, h), (-h, h), self.workspace_z_range)]


@dataclass(frozen=True)
class JointAngles:
    theta1: float
    theta2: float
    theta3: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta1, self.theta2, self.theta3)


def _to_limb_frame(x, y, azimuth_deg):
    a = math.radians(azimuth_deg)
    c, s = math.cos(a), math.sin(a)
    return c * x + s * y, -s * x + c * y


def _limb_angle(g: DeltaGeometry, x: float, y: float, z: float) -> float:
    """Joint angle (deg) for one limb with the target already in its frame.

    The elbow circle ``(f + r cos t, 0, r sin t)`` must meet the sphere of
    radius ``L`` around the wrist. Expanding gives ``A cos t + B sin t = K``;
    the discriminant ``A^2 + B^2 - K^2`` decides reachability.
    """
    a = g.base_radius - (x + g.platform_radius)
    rf, re = g.proximal_length, g.distal_length
    A = 2.0 * a * rf
    B = -2.0 * z * rf
    K = re * re - y * y - a * a - rf * rf - z * z
    R2 = A * A + B * B
    if R2 == 0.0 or K * K > R2:
        raise Unreachable(f"limb cannot reach ({x:.4g}, {y:.4g}, {z:.4g})")
    # elbow-out branch: the larger of the two roots
    t = math.atan2(B, A) + math.acos(K / math.sqrt(R2))
    t = math.degrees(t)
    if t > 180.0:
        t -= 360.0
    return t


def inverse_kinematics(g: DeltaGeometry, target: Vec3) -> JointAngles:
    angles = []
    lo, hi = g.servo_limits
    for az in LIMB_AZIMUTHS_DEG:
        xl, yl = _to_limb_frame(target.x, target.y, az)
        t = _limb_angle(g, xl, yl, target.z)
        if not lo <= t <= hi:
            raise Unreachable(f"joint angle {t:.3f} deg outside servo limits [{lo}, {hi}]")
        angles.append(t)
    return JointAngles(*angles)


def _sphere_centres(g: DeltaGeometry, j: JointAngles) -> list[np.ndarray]:
    centres = []
    for az, theta in zip(LIMB_AZIMUTHS_DEG, j.as_tuple()):
        t = math.radians(theta)
        # elbow pulled in by the platform radius, so all spheres share the
        # platform centre as their common point
        r = g.base_radius + g.proximal_length * math.cos(t) - g.platform_radius
        h = g.proximal_length * math.sin(t)
        a = math.radians(az)
        centres.append(np.array([r * math.cos(a), r * math.sin(a), h]))
    return centres


def trilaterate(p1, p2, p3, r1, r2, r3):
    """Both intersection points of three spheres, or NoIntersection."""
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    d_vec = p2 - p1
    d = np.linalg.norm(d_vec)
    if d == 0.0:
        raise NoIntersection("coincident sphere centres")
    ex = d_vec / d
    i = ex @ (p3 - p1)
    ey_vec = p3 - p1 - i * ex
    ey_norm = np.linalg.norm(ey_vec)
    if ey_norm == 0.0:
        raise NoIntersection("collinear sphere centres")
    ey = ey_vec / ey_norm
    ez = np.cross(ex, ey)
    j = ey @ (p3 - p1)
    x = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    y = (r1 * r1 - r3 * r3 + i * i + j * j) / (2.0 * j) - (i / j) * x
    z2 = r1 * r1 - x * x - y * y
    if z2 < 0.0:
        if z2 > -1e-9 * r1 * r1:
            z2 = 0.0
        else:
            raise NoIntersection("spheres do not meet")
    z = math.sqrt(z2)
    base = p1 + x * ex + y * ey
    return base + z * ez, base - z * ez


def forward_kinematics(g: DeltaGeometry, j: JointAngles) -> Vec3:
    if not all(math.isfinite(t) for t in j.as_tuple()):
        raise ValueError("joint angles must be finite")
    c1, c2, c3 = _sphere_centres(g, j)
    L = g.distal_length
    s1, s2 = trilaterate(c1, c2, c3, L, L, L)
    # working side: the solution farther out along +Z
    p = s1 if s1[2] >= s2[2] else s2
    return Vec3.from_array(p)


def in_workspace(g: DeltaGeometry, p: Vec3) -> bool:
    h = g.workspace_xy_halfrange
    z_min, z_max = g.workspace_z_range
    if abs(p.x) > h or abs(p.y) > h or not z_min <= p.z <= z_max:
        return False
    try:
        inverse_kinematics(g, p)
    except Unreachable:
        return False
    return True


def validate_workspace(g: DeltaGeometry) -> None:
    """Raise ConfigError unless every corner of the workspace box is reachable."""
    bad = []
    for c in g.box_corners():
        try:
            inverse_kinematics(g, c)
        except Unreachable:
            bad.append((c.x, c.y, c.z))
    if bad:
        raise ConfigError(f"workspace corners unreachable for {g}: {bad}")
