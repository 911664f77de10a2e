"""Geometric primitives: vectors, transforms, bounding boxes, framing cameras.

Conventions: right-handed, Z-up, meters, Euler XYZ in degrees. Cameras look
along their local -Z axis with +Y up, so a transform produced here can be
applied verbatim in the DCC tool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import SceneSmithError


class EmptyInput(SceneSmithError):
    code = "empty_input"


@dataclass(frozen=True)
class Vec3:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.x, self.y, self.z))

    def to_list(self) -> list[float]:
        return [float(self.x), float(self.y), float(self.z)]

    @classmethod
    def from_list(cls, xs: Sequence[float]) -> "Vec3":
        return cls(float(xs[0]), float(xs[1]), float(xs[2]))


@dataclass(frozen=True)
class Transform:
    """Position, Euler XYZ rotation (degrees) and per-axis scale."""

    position: Vec3 = Vec3()
    rotation: Vec3 = Vec3()
    scale: Vec3 = Vec3(1.0, 1.0, 1.0)

    def validate(self) -> None:
        if not (self.position.is_finite() and self.rotation.is_finite() and self.scale.is_finite()):
            raise ValueError("transform components must be finite")
        if min(self.scale.x, self.scale.y, self.scale.z) <= 0.0:
            raise ValueError("scale components must be > 0")
        for c in (self.rotation.x, self.rotation.y, self.rotation.z):
            if not -360.0 <= c <= 360.0:
                raise ValueError("rotation components must lie in [-360, 360] degrees")

    def to_dict(self) -> dict:
        return {
            "position": self.position.to_list(),
            "rotation": self.rotation.to_list(),
            "scale": self.scale.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transform":
        return cls(
            position=Vec3.from_list(d["position"]),
            rotation=Vec3.from_list(d["rotation"]),
            scale=Vec3.from_list(d["scale"]),
        )


@dataclass(frozen=True)
class Aabb:
    min: Vec3
    max: Vec3

    def __post_init__(self) -> None:
        if self.min.x > self.max.x or self.min.y > self.max.y or self.min.z > self.max.z:
            raise ValueError("aabb min must be <= max componentwise")

    @property
    def center(self) -> Vec3:
        return Vec3(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
            (self.min.z + self.max.z) / 2.0,
        )

    @property
    def extent(self) -> Vec3:
        return self.max - self.min

    def bounding_sphere_radius(self) -> float:
        return (self.max - self.min).norm() / 2.0

    def corners(self) -> list[Vec3]:
        lo, hi = self.min, self.max
        return [
            Vec3(x, y, z)
            for x in (lo.x, hi.x)
            for y in (lo.y, hi.y)
            for z in (lo.z, hi.z)
        ]


def compute_aabb(points: Iterable[Vec3]) -> Aabb:
    """Componentwise min/max of a non-empty point set."""
    it = iter(points)
    try:
        first = next(it)
    except StopIteration:
        raise EmptyInput("cannot compute bounding box of zero points") from None
    lo = [first.x, first.y, first.z]
    hi = list(lo)
    for p in it:
        lo[0] = min(lo[0], p.x)
        lo[1] = min(lo[1], p.y)
        lo[2] = min(lo[2], p.z)
        hi[0] = max(hi[0], p.x)
        hi[1] = max(hi[1], p.y)
        hi[2] = max(hi[2], p.z)
    return Aabb(Vec3(*lo), Vec3(*hi))


_WORLD_UP = Vec3(0.0, 0.0, 1.0)
_MIN_RADIUS = 1e-6  # degenerate (zero extent) boxes are framed as if this big


def look_at_rotation(forward: Vec3) -> Vec3:
    """Euler XYZ (degrees) rotating a -Z forward / +Y up camera onto ``forward``.

    Roll-free with respect to world +Z. When looking straight up or down the
    world X axis is used as the right vector.
    """
    f = forward.normalized()
    right = f.cross(_WORLD_UP)
    if right.norm() < 1e-12:
        right = Vec3(1.0, 0.0, 0.0)
    else:
        right = right.normalized()
    up = right.cross(f)
    # Columns are the camera's world-space axes [right, up, back]; decompose as Rz*Ry*Rx.
    m = (
        (right.x, up.x, -f.x),
        (right.y, up.y, -f.y),
        (right.z, up.z, -f.z),
    )
    sy = -m[2][0]
    cy = math.sqrt(max(0.0, 1.0 - sy * sy))
    if cy > 1e-9:
        ax = math.atan2(m[2][1], m[2][2])
        ay = math.asin(max(-1.0, min(1.0, sy)))
        az = math.atan2(m[1][0], m[0][0])
    else:
        # Gimbal lock: pitch is +-90 degrees, fold roll into x.
        ax = math.atan2(-m[0][1], m[1][1])
        ay = math.copysign(math.pi / 2.0, sy)
        az = 0.0
    return Vec3(math.degrees(ax), math.degrees(ay), math.degrees(az))


def rotation_matrix_xyz(rotation_deg: Vec3) -> tuple[tuple[float, float, float], ...]:
    """Rz*Ry*Rx rotation matrix for Euler XYZ angles in degrees."""
    ax, ay, az = (math.radians(c) for c in rotation_deg.to_list())
    sa, ca = math.sin(ax), math.cos(ax)
    sb, cb = math.sin(ay), math.cos(ay)
    sc, cc = math.sin(az), math.cos(az)
    return (
        (cb * cc, sa * sb * cc - ca * sc, ca * sb * cc + sa * sc),
        (cb * sc, sa * sb * sc + ca * cc, ca * sb * sc - sa * cc),
        (-sb, sa * cb, ca * cb),
    )


def compute_framing_camera(
    aabb: Aabb,
    vertical_fov_deg: float,
    margin: float = 1.0,
    view_dir: Vec3 = Vec3(0.0, -1.0, 0.0),
) -> Transform:
    """Camera transform that frames ``aabb`` from direction ``view_dir``.

    The box is fitted by its bounding sphere: the camera sits at distance
    d = margin * r / sin(fov/2) from the box center, looking at it, where r
    is the bounding-sphere radius. Zero-extent boxes use a tiny epsilon
    radius instead of raising, so single points are framed too.
    """
    if not 0.0 < vertical_fov_deg < 180.0:
        raise ValueError("vertical fov must lie in (0, 180) degrees")
    if margin < 1.0:
        raise ValueError("margin must be >= 1")
    f = view_dir.normalized()
    radius = max(aabb.bounding_sphere_radius(), _MIN_RADIUS)
    dist = margin * radius / math.sin(math.radians(vertical_fov_deg) / 2.0)
    center = aabb.center
    position = center - f * dist
    return Transform(position=position, rotation=look_at_rotation(f), scale=Vec3(1.0, 1.0, 1.0))
