"""Scene graph: asset instances, placement regions, terrain, and exporters.

The SceneGraph is the authoritative in-memory world. It is single-writer:
callers serialize mutations, reads may be shared. scene-json round-trips
losslessly; the OBJ export writes the terrain grid plus one axis-aligned box
proxy per instance (real meshes live only in the DCC tool).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import SceneSmithError
from .geometry import Transform, Vec3
from .jsonutil import canonical_bytes
from .terrain import Heightfield
import json

SCENE_SCHEMA = "scene/1"

_EDGE_EPS = 1e-9


class DuplicateId(SceneSmithError):
    code = "duplicate_id"


class InvalidRegion(SceneSmithError):
    code = "invalid_region"


class SceneFormatError(SceneSmithError):
    code = "scene_format"


class Region:
    """Planar placement domain. Containment is boundary-inclusive."""

    kind = "region"

    def contains(self, x: float, y: float) -> bool:
        raise NotImplementedError

    def area(self) -> float:
        raise NotImplementedError

    def bounds(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max)."""
        raise NotImplementedError

    def centroid(self) -> tuple[float, float]:
        raise NotImplementedError

    def boundary_points(self, n: int = 64) -> list[tuple[float, float]]:
        raise NotImplementedError

    def random_point(self, rng) -> tuple[float, float]:
        """Uniform point inside the region (rejection from bounds for polygons)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "Region":
        kind = d.get("kind")
        if kind == "rectangle":
            return RectRegion(float(d["x_min"]), float(d["y_min"]), float(d["x_max"]), float(d["y_max"]))
        if kind == "disc":
            return DiscRegion(float(d["cx"]), float(d["cy"]), float(d["radius"]))
        if kind == "polygon":
            return PolyRegion(tuple((float(x), float(y)) for x, y in d["vertices"]))
        raise InvalidRegion(f"unknown region kind {kind!r}")


@dataclass(frozen=True)
class RectRegion(Region):
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    kind = "rectangle"

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InvalidRegion("rectangle must have positive extent")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def centroid(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def boundary_points(self, n: int = 64) -> list[tuple[float, float]]:
        corners = [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
        return _walk_closed_loop(corners, n)

    def random_point(self, rng) -> tuple[float, float]:
        return (rng.uniform(self.x_min, self.x_max), rng.uniform(self.y_min, self.y_max))

    def to_dict(self) -> dict:
        return {
            "kind": "rectangle",
            "x_min": float(self.x_min),
            "y_min": float(self.y_min),
            "x_max": float(self.x_max),
            "y_max": float(self.y_max),
        }


@dataclass(frozen=True)
class DiscRegion(Region):
    cx: float
    cy: float
    radius: float
    kind = "disc"

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise InvalidRegion("disc radius must be > 0")

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.cx, y - self.cy) <= self.radius + _EDGE_EPS

    def area(self) -> float:
        return math.pi * self.radius * self.radius

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.cx - self.radius, self.cy - self.radius, self.cx + self.radius, self.cy + self.radius)

    def centroid(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def boundary_points(self, n: int = 64) -> list[tuple[float, float]]:
        return [
            (self.cx + self.radius * math.cos(2 * math.pi * k / n),
             self.cy + self.radius * math.sin(2 * math.pi * k / n))
            for k in range(n)
        ]

    def random_point(self, rng) -> tuple[float, float]:
        r = self.radius * math.sqrt(rng.random())
        a = rng.uniform(0.0, 2.0 * math.pi)
        return (self.cx + r * math.cos(a), self.cy + r * math.sin(a))

    def to_dict(self) -> dict:
        return {"kind": "disc", "cx": float(self.cx), "cy": float(self.cy), "radius": float(self.radius)}


@dataclass(frozen=True)
class PolyRegion(Region):
    vertices: tuple[tuple[float, float], ...]
    kind = "polygon"

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise InvalidRegion("polygon needs at least 3 vertices")
        if abs(_shoelace(self.vertices)) < 1e-12:
            raise InvalidRegion("polygon must have positive area")
        if _self_intersects(self.vertices):
            raise InvalidRegion("polygon must not self-intersect")

    def contains(self, x: float, y: float) -> bool:
        if _on_boundary(self.vertices, x, y):
            return True
        return _ray_cast(self.vertices, x, y)

    def area(self) -> float:
        return abs(_shoelace(self.vertices))

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs), min(ys), max(xs), max(ys))

    def centroid(self) -> tuple[float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (sum(xs) / len(xs), sum(ys) / len(ys))

    def boundary_points(self, n: int = 64) -> list[tuple[float, float]]:
        return _walk_closed_loop(list(self.vertices), n)

    def random_point(self, rng) -> tuple[float, float]:
        x_min, y_min, x_max, y_max = self.bounds()
        for _ in range(10_000):
            x = rng.uniform(x_min, x_max)
            y = rng.uniform(y_min, y_max)
            if self.contains(x, y):
                return (x, y)
        raise InvalidRegion("failed to sample a point inside the polygon")

    def to_dict(self) -> dict:
        return {"kind": "polygon", "vertices": [[float(x), float(y)] for x, y in self.vertices]}


def _shoelace(vertices: Sequence[tuple[float, float]]) -> float:
    s = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2.0


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-12:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _self_intersects(vertices: Sequence[tuple[float, float]]) -> bool:
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges share a vertex
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def _on_boundary(vertices: Sequence[tuple[float, float]], x: float, y: float) -> bool:
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            d = math.hypot(x - ax, y - ay)
        else:
            t = max(0.0, min(1.0, ((x - ax) * dx + (y - ay) * dy) / seg2))
            d = math.hypot(x - (ax + t * dx), y - (ay + t * dy))
        if d <= _EDGE_EPS:
            return True
    return False


def _ray_cast(vertices: Sequence[tuple[float, float]], x: float, y: float) -> bool:
    inside = False
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        if (ay > y) != (by > y):
            t = (y - ay) / (by - ay)
            if x < ax + t * (bx - ax):
                inside = not inside
    return inside


def _walk_closed_loop(corners: list[tuple[float, float]], n: int) -> list[tuple[float, float]]:
    """n points spread along a closed polyline at equal arc-length steps."""
    pts = corners + [corners[0]]
    lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:])]
    total = sum(lengths)
    out = []
    for k in range(n):
        s = total * k / n
        for idx, seg in enumerate(lengths):
            if s <= seg or idx == len(lengths) - 1:
                a, b = pts[idx], pts[idx + 1]
                t = 0.0 if seg == 0 else min(1.0, s / seg)
                out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
                break
            s -= seg
    return out


def region_within(child: Region, parent: Region, samples: int = 128) -> bool:
    """Approximate containment test: every sampled boundary point of the
    child (plus its centroid) lies inside the parent. Exact in the limit for
    convex parents."""
    cx, cy = child.centroid()
    if not parent.contains(cx, cy):
        return False
    return all(parent.contains(x, y) for x, y in child.boundary_points(samples))


@dataclass
class AssetInstance:
    id: str
    asset_ref: str
    transform: Transform = field(default_factory=Transform)
    tags: set[str] = field(default_factory=set)
    projected: bool = False  # whether z was snapped to the terrain

    def validate(self) -> None:
        if not self.id:
            raise ValueError("instance id must be non-empty")
        self.transform.validate()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "asset_ref": self.asset_ref,
            "transform": self.transform.to_dict(),
            "tags": sorted(self.tags),
            "projected": self.projected,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AssetInstance":
        return cls(
            id=d["id"],
            asset_ref=d["asset_ref"],
            transform=Transform.from_dict(d["transform"]),
            tags=set(d.get("tags", [])),
            projected=bool(d.get("projected", False)),
        )


@dataclass
class SceneGraph:
    seed: int = 0
    instances: list[AssetInstance] = field(default_factory=list)
    terrain: Heightfield | None = None
    regions: dict[str, Region] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def instance_ids(self) -> set[str]:
        return {inst.id for inst in self.instances}

    def add_instance(self, inst: AssetInstance) -> None:
        inst.validate()
        if not inst.transform.position.is_finite():
            raise ValueError("instance position must be finite")
        if any(existing.id == inst.id for existing in self.instances):
            raise DuplicateId(f"instance id {inst.id!r} already present")
        self.instances.append(inst)

    def find(self, tag_or_id: str) -> list[AssetInstance]:
        return [i for i in self.instances if i.id == tag_or_id or tag_or_id in i.tags]

    def to_dict(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "seed": self.seed,
            "metadata": dict(self.metadata),
            "regions": {name: r.to_dict() for name, r in self.regions.items()},
            "terrain": self.terrain.to_dict() if self.terrain else None,
            "instances": [inst.to_dict() for inst in self.instances],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneGraph":
        if d.get("schema") != SCENE_SCHEMA:
            raise SceneFormatError(f"unsupported scene schema {d.get('schema')!r}")
        return cls(
            seed=int(d.get("seed", 0)),
            instances=[AssetInstance.from_dict(x) for x in d.get("instances", [])],
            terrain=Heightfield.from_dict(d["terrain"]) if d.get("terrain") else None,
            regions={name: Region.from_dict(r) for name, r in d.get("regions", {}).items()},
            metadata=dict(d.get("metadata", {})),
        )


def export_scene_json(scene: SceneGraph) -> bytes:
    return canonical_bytes(scene.to_dict())


def import_scene_json(data: bytes | str) -> SceneGraph:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        d = json.loads(data)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"invalid scene json: {e}") from e
    return SceneGraph.from_dict(d)


_BOX_FACES = [
    (0, 1, 3, 2),
    (4, 6, 7, 5),
    (0, 4, 5, 1),
    (2, 3, 7, 6),
    (0, 2, 6, 4),
    (1, 5, 7, 3),
]


def _fmt(v: float) -> str:
    return repr(float(v))


def export_scene_obj(scene: SceneGraph) -> bytes:
    """Wavefront OBJ with v/f records only: terrain grid mesh plus one
    axis-aligned box proxy per instance (rotation intentionally ignored)."""
    lines: list[str] = []
    offset = 0
    if scene.terrain is not None:
        verts, faces = scene.terrain.mesh()
        for x, y, z in verts:
            lines.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
        for face in faces:
            lines.append("f " + " ".join(str(i + 1) for i in face))
        offset = len(verts)
    for inst in scene.instances:
        p = inst.transform.position
        s = inst.transform.scale
        hx, hy, hz = s.x / 2.0, s.y / 2.0, s.z / 2.0
        corners = [
            (p.x + dx, p.y + dy, p.z + dz)
            for dx in (-hx, hx)
            for dy in (-hy, hy)
            for dz in (-hz, hz)
        ]
        for x, y, z in corners:
            lines.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
        for face in _BOX_FACES:
            lines.append("f " + " ".join(str(offset + i + 1) for i in face))
        offset += 8
    return ("\n".join(lines) + "\n").encode("utf-8")


def export_scene(scene: SceneGraph, fmt: str) -> bytes:
    if fmt == "scene-json":
        return export_scene_json(scene)
    if fmt == "obj":
        return export_scene_obj(scene)
    raise SceneFormatError(f"unknown export format {fmt!r}")
