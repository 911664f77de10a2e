"""Procedural layout generators and relation-driven placement resolution.

Five generators: scatter (dart-throwing with a 30*count attempt budget),
grid, linear (arc-length walk along a polyline), nested (children inside a
parent region, depth capped at 3), and area_fill (row-major lattice of
footprint+gap cells clipped to the region).

Every generator is a pure function of its spec (seed included): repeated
calls are byte-identical. Saturation (scatter cannot reach the requested
count) is reported in placement meta, not raised: infeasible densities are
an outcome, not an error.

Spatial relations (near / on / inside / along / avoid / surround) resolve to
generator specs; the six kinds are this engine's closure of path-like and
containment-like arrangement patterns, and new kinds can be registered by
name.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import SceneSmithError
from .geometry import Transform, Vec3
from .scene import DiscRegion, RectRegion, PolyRegion, Region, SceneGraph, region_within
from .terrain import Heightfield, OutOfBounds, sample_height

SCATTER_ATTEMPTS_PER_POINT = 30
_MERGE_EPS = 1e-9
_MAX_NESTING = 3

RELATION_KINDS = ("near", "on", "inside", "along", "avoid", "surround")


class InvalidSpec(SceneSmithError):
    code = "invalid_spec"


class DegeneratePath(SceneSmithError):
    code = "degenerate_path"


class ChildRegionEscapesParent(SceneSmithError):
    code = "child_region_escapes_parent"


class UnknownAnchor(SceneSmithError):
    code = "unknown_anchor"


class UnsupportedRelation(SceneSmithError):
    code = "unsupported_relation"


@dataclass(frozen=True)
class ScatterSpec:
    region: Region
    count: int
    min_separation: float
    seed: int = 0
    exclusions: tuple[Region, ...] = ()
    kind = "scatter"


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    rows: int
    cols: int
    spacing: float
    jitter: float = 0.0
    seed: int = 0
    kind = "grid"


@dataclass(frozen=True)
class LinearSpec:
    path: tuple[tuple[float, float], ...]
    spacing: float
    lateral_offset: float = 0.0
    align_to_tangent: bool = False
    kind = "linear"


@dataclass(frozen=True)
class AreaFillSpec:
    region: Region
    footprint: tuple[float, float]
    gap: float = 0.0
    orientation_deg: float = 0.0
    kind = "area_fill"


@dataclass(frozen=True)
class NestedSpec:
    parent: Region
    children: tuple["LayoutSpec", ...]
    kind = "nested"


LayoutSpec = Union[ScatterSpec, GridSpec, LinearSpec, AreaFillSpec, NestedSpec]


@dataclass
class Placement:
    transforms: list[Transform]
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.transforms)


def spec_to_dict(spec: LayoutSpec) -> dict:
    if isinstance(spec, ScatterSpec):
        return {
            "kind": "scatter",
            "region": spec.region.to_dict(),
            "count": int(spec.count),
            "min_separation": float(spec.min_separation),
            "seed": int(spec.seed),
            "exclusions": [r.to_dict() for r in spec.exclusions],
        }
    if isinstance(spec, GridSpec):
        return {
            "kind": "grid",
            "origin": [float(spec.origin[0]), float(spec.origin[1])],
            "rows": int(spec.rows),
            "cols": int(spec.cols),
            "spacing": float(spec.spacing),
            "jitter": float(spec.jitter),
            "seed": int(spec.seed),
        }
    if isinstance(spec, LinearSpec):
        return {
            "kind": "linear",
            "path": [[float(x), float(y)] for x, y in spec.path],
            "spacing": float(spec.spacing),
            "lateral_offset": float(spec.lateral_offset),
            "align_to_tangent": bool(spec.align_to_tangent),
        }
    if isinstance(spec, AreaFillSpec):
        return {
            "kind": "area_fill",
            "region": spec.region.to_dict(),
            "footprint": [float(spec.footprint[0]), float(spec.footprint[1])],
            "gap": float(spec.gap),
            "orientation_deg": float(spec.orientation_deg),
        }
    if isinstance(spec, NestedSpec):
        return {
            "kind": "nested",
            "parent": spec.parent.to_dict(),
            "children": [spec_to_dict(c) for c in spec.children],
        }
    raise InvalidSpec(f"unknown layout spec type {type(spec).__name__}")


def spec_from_dict(d: dict) -> LayoutSpec:
    kind = d.get("kind")
    if kind == "scatter":
        return ScatterSpec(
            region=Region.from_dict(d["region"]),
            count=int(d["count"]),
            min_separation=float(d["min_separation"]),
            seed=int(d.get("seed", 0)),
            exclusions=tuple(Region.from_dict(r) for r in d.get("exclusions", [])),
        )
    if kind == "grid":
        return GridSpec(
            origin=(float(d["origin"][0]), float(d["origin"][1])),
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            spacing=float(d["spacing"]),
            jitter=float(d.get("jitter", 0.0)),
            seed=int(d.get("seed", 0)),
        )
    if kind == "linear":
        return LinearSpec(
            path=tuple((float(x), float(y)) for x, y in d["path"]),
            spacing=float(d["spacing"]),
            lateral_offset=float(d.get("lateral_offset", 0.0)),
            align_to_tangent=bool(d.get("align_to_tangent", False)),
        )
    if kind == "area_fill":
        return AreaFillSpec(
            region=Region.from_dict(d["region"]),
            footprint=(float(d["footprint"][0]), float(d["footprint"][1])),
            gap=float(d.get("gap", 0.0)),
            orientation_deg=float(d.get("orientation_deg", 0.0)),
        )
    if kind == "nested":
        return NestedSpec(
            parent=Region.from_dict(d["parent"]),
            children=tuple(spec_from_dict(c) for c in d["children"]),
        )
    raise InvalidSpec(f"unknown layout kind {kind!r}")


def _point_transform(x: float, y: float, yaw_deg: float = 0.0) -> Transform:
    return Transform(position=Vec3(x, y, 0.0), rotation=Vec3(0.0, 0.0, yaw_deg))


def scatter(spec: ScatterSpec) -> Placement:
    if spec.count < 0:
        raise InvalidSpec("scatter count must be >= 0")
    if spec.count > 0 and spec.min_separation <= 0:
        raise InvalidSpec("min_separation must be > 0")
    rng = random.Random(spec.seed)
    accepted: list[tuple[float, float]] = []
    min_sep2 = spec.min_separation * spec.min_separation
    budget = SCATTER_ATTEMPTS_PER_POINT * spec.count
    attempts = 0
    while len(accepted) < spec.count and attempts < budget:
        attempts += 1
        x, y = spec.region.random_point(rng)
        if any(excl.contains(x, y) for excl in spec.exclusions):
            continue
        if any((x - ax) ** 2 + (y - ay) ** 2 < min_sep2 for ax, ay in accepted):
            continue
        accepted.append((x, y))
    return Placement(
        transforms=[_point_transform(x, y) for x, y in accepted],
        meta={
            "kind": "scatter",
            "seed": spec.seed,
            "saturated": len(accepted) < spec.count,
        },
    )


def grid(spec: GridSpec) -> Placement:
    if spec.rows < 1 or spec.cols < 1:
        raise InvalidSpec("grid needs rows >= 1 and cols >= 1")
    if spec.spacing <= 0:
        raise InvalidSpec("grid spacing must be > 0")
    if spec.jitter < 0:
        raise InvalidSpec("grid jitter must be >= 0")
    rng = random.Random(spec.seed) if spec.jitter > 0 else None
    ox, oy = spec.origin
    transforms = []
    for row in range(spec.rows):
        for col in range(spec.cols):
            x = ox + col * spec.spacing
            y = oy + row * spec.spacing
            if rng is not None:
                x += rng.uniform(-spec.jitter, spec.jitter)
                y += rng.uniform(-spec.jitter, spec.jitter)
            transforms.append(_point_transform(x, y))
    return Placement(transforms=transforms, meta={"kind": "grid", "seed": spec.seed})


def _merge_path(path: tuple[tuple[float, float], ...]) -> list[tuple[float, float]]:
    merged: list[tuple[float, float]] = []
    for p in path:
        if merged and math.hypot(p[0] - merged[-1][0], p[1] - merged[-1][1]) < _MERGE_EPS:
            continue
        merged.append((float(p[0]), float(p[1])))
    return merged


def _path_point(pts: list[tuple[float, float]], lengths: list[float], s: float) -> tuple[float, float, float, float]:
    """Point and unit tangent at arc length s; s is clamped to the path."""
    s = max(0.0, min(s, sum(lengths)))
    for idx, seg in enumerate(lengths):
        if s <= seg or idx == len(lengths) - 1:
            ax, ay = pts[idx]
            bx, by = pts[idx + 1]
            t = 0.0 if seg == 0 else min(1.0, s / seg)
            tx, ty = (bx - ax) / seg, (by - ay) / seg
            return (ax + t * (bx - ax), ay + t * (by - ay), tx, ty)
        s -= seg
    raise AssertionError("unreachable")


def linear(spec: LinearSpec) -> Placement:
    if spec.spacing <= 0:
        raise InvalidSpec("linear spacing must be > 0")
    pts = _merge_path(spec.path)
    if len(pts) < 2:
        raise DegeneratePath("path must have positive length")
    lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:])]
    total = sum(lengths)
    if total <= 0:
        raise DegeneratePath("path must have positive length")
    count = int(math.floor(total / spec.spacing + 1e-9)) + 1
    transforms = []
    for i in range(count):
        x, y, tx, ty = _path_point(pts, lengths, i * spec.spacing)
        # left normal of the tangent
        x += -ty * spec.lateral_offset
        y += tx * spec.lateral_offset
        yaw = math.degrees(math.atan2(ty, tx)) if spec.align_to_tangent else 0.0
        transforms.append(_point_transform(x, y, yaw))
    return Placement(transforms=transforms, meta={"kind": "linear", "seed": 0})


def _spec_depth(spec: LayoutSpec) -> int:
    if isinstance(spec, NestedSpec):
        return 1 + max((_spec_depth(c) for c in spec.children), default=0)
    return 1


def _child_region(spec: LayoutSpec) -> Region | None:
    if isinstance(spec, (ScatterSpec, AreaFillSpec)):
        return spec.region
    if isinstance(spec, NestedSpec):
        return spec.parent
    return None


def nested(spec: NestedSpec) -> Placement:
    if _spec_depth(spec) > _MAX_NESTING:
        raise InvalidSpec(f"nesting depth exceeds {_MAX_NESTING}")
    transforms: list[Transform] = []
    child_index: list[int] = []
    children_meta: list[dict] = []
    for idx, child in enumerate(spec.children):
        region = _child_region(child)
        if region is not None and not region_within(region, spec.parent):
            raise ChildRegionEscapesParent(f"child {idx} region escapes the parent region")
        placement = generate(child)
        if region is None:
            for tr in placement.transforms:
                if not spec.parent.contains(tr.position.x, tr.position.y):
                    raise ChildRegionEscapesParent(f"child {idx} emits positions outside the parent region")
        transforms.extend(placement.transforms)
        child_index.extend([idx] * len(placement.transforms))
        children_meta.append(placement.meta)
    return Placement(
        transforms=transforms,
        meta={
            "kind": "nested",
            "seed": 0,
            "child_index": child_index,
            "children_meta": children_meta,
        },
    )


def area_fill(spec: AreaFillSpec) -> Placement:
    w, h = spec.footprint
    if w <= 0 or h <= 0:
        raise InvalidSpec("footprint extents must be > 0")
    if spec.gap < 0:
        raise InvalidSpec("gap must be >= 0")
    # rotated footprints are packed by their axis-aligned bounds
    theta = math.radians(spec.orientation_deg)
    ew = abs(w * math.cos(theta)) + abs(h * math.sin(theta))
    eh = abs(w * math.sin(theta)) + abs(h * math.cos(theta))
    x_min, y_min, x_max, y_max = spec.region.bounds()
    pitch_x = ew + spec.gap
    pitch_y = eh + spec.gap
    transforms = []
    cy = y_min + eh / 2.0
    while cy + eh / 2.0 <= y_max + 1e-9:
        cx = x_min + ew / 2.0
        while cx + ew / 2.0 <= x_max + 1e-9:
            corners = [
                (cx - ew / 2.0, cy - eh / 2.0),
                (cx + ew / 2.0, cy - eh / 2.0),
                (cx + ew / 2.0, cy + eh / 2.0),
                (cx - ew / 2.0, cy + eh / 2.0),
            ]
            if all(spec.region.contains(x, y) for x, y in corners) and spec.region.contains(cx, cy):
                transforms.append(_point_transform(cx, cy, spec.orientation_deg))
            cx += pitch_x
        cy += pitch_y
    meta: dict[str, Any] = {"kind": "area_fill", "seed": 0}
    if not transforms and (ew > x_max - x_min or eh > y_max - y_min):
        meta["footprint_larger_than_region"] = True
    return Placement(transforms=transforms, meta=meta)


def generate(spec: LayoutSpec) -> Placement:
    if isinstance(spec, ScatterSpec):
        return scatter(spec)
    if isinstance(spec, GridSpec):
        return grid(spec)
    if isinstance(spec, LinearSpec):
        return linear(spec)
    if isinstance(spec, AreaFillSpec):
        return area_fill(spec)
    if isinstance(spec, NestedSpec):
        return nested(spec)
    raise InvalidSpec(f"unknown layout spec type {type(spec).__name__}")


@dataclass(frozen=True)
class SpatialRelation:
    subject: str
    kind: str
    anchor: str
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"subject": self.subject, "kind": self.kind, "anchor": self.anchor, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpatialRelation":
        return cls(
            subject=d["subject"],
            kind=d["kind"],
            anchor=d.get("anchor", ""),
            params=dict(d.get("params", {})),
        )


def _anchor_point(scene: SceneGraph, name: str) -> tuple[float, float] | None:
    matches = scene.find(name)
    if not matches:
        return None
    xs = [m.transform.position.x for m in matches]
    ys = [m.transform.position.y for m in matches]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def _terrain_region(scene: SceneGraph, terrain_extent: tuple[float, float] | None) -> RectRegion | None:
    if scene.terrain is not None:
        return RectRegion(0.0, 0.0, scene.terrain.size_x, scene.terrain.size_y)
    if terrain_extent is not None:
        return RectRegion(0.0, 0.0, terrain_extent[0], terrain_extent[1])
    return None


def resolve_relation(
    rel: SpatialRelation,
    scene: SceneGraph,
    seed: int = 0,
    terrain_extent: tuple[float, float] | None = None,
) -> LayoutSpec:
    """Turn a spatial relation into a concrete generator spec.

    ``terrain_extent`` lets the planner resolve "on terrain" relations for a
    terrain that is in the plan but not yet executed. Relations of kind "on"
    additionally want terrain projection; callers check ``rel.kind``.
    """
    if rel.kind not in RELATION_KINDS:
        raise UnsupportedRelation(f"unknown relation kind {rel.kind!r}")
    p = rel.params
    count = int(p.get("count", 1))
    min_sep = float(p.get("min_separation", 0.5))

    if rel.kind == "near":
        anchor = _resolve_anchor_xy(rel, scene, terrain_extent)
        dist_max = float(p.get("dist_max", p.get("distance", 5.0)))
        dist_min = float(p.get("dist_min", 0.0))
        if dist_max <= 0 or dist_min < 0 or dist_min >= dist_max:
            raise UnsupportedRelation("near needs 0 <= dist_min < dist_max")
        exclusions: tuple[Region, ...] = ()
        if dist_min > 0:
            exclusions = (DiscRegion(anchor[0], anchor[1], dist_min),)
        return ScatterSpec(
            region=DiscRegion(anchor[0], anchor[1], dist_max),
            count=count,
            min_separation=min_sep,
            seed=seed,
            exclusions=exclusions,
        )

    if rel.kind == "on":
        region = _terrain_region(scene, terrain_extent)
        if region is None:
            raise UnknownAnchor("relation 'on' needs a terrain in the scene or plan")
        return ScatterSpec(region=region, count=count, min_separation=min_sep, seed=seed)

    if rel.kind == "inside":
        region = scene.regions.get(rel.anchor)
        if region is None:
            raise UnknownAnchor(f"region {rel.anchor!r} not found in scene")
        return ScatterSpec(region=region, count=count, min_separation=min_sep, seed=seed)

    if rel.kind == "along":
        path = p.get("path")
        if path is None:
            region = scene.regions.get(rel.anchor)
            if isinstance(region, PolyRegion):
                path = list(region.vertices) + [region.vertices[0]]
            else:
                raise UnknownAnchor(f"relation 'along' needs a path or a polygon region, got {rel.anchor!r}")
        spacing = float(p.get("spacing", 5.0))
        return LinearSpec(
            path=tuple((float(x), float(y)) for x, y in path),
            spacing=spacing,
            lateral_offset=float(p.get("lateral_offset", 0.0)),
            align_to_tangent=bool(p.get("align_to_tangent", True)),
        )

    if rel.kind == "avoid":
        domain = _terrain_region(scene, terrain_extent)
        region_name = p.get("region")
        if region_name is not None:
            domain = scene.regions.get(region_name) or domain
        if domain is None:
            raise UnknownAnchor("relation 'avoid' needs a terrain or a named domain region")
        excl_region = scene.regions.get(rel.anchor)
        if excl_region is None:
            anchor = _resolve_anchor_xy(rel, scene, terrain_extent)
            clearance = float(p.get("clearance", 1.0))
            excl_region = DiscRegion(anchor[0], anchor[1], clearance)
        return ScatterSpec(
            region=domain,
            count=count,
            min_separation=min_sep,
            seed=seed,
            exclusions=(excl_region,),
        )

    # surround: count points evenly spaced on a circle, realized as a linear
    # walk over the exact circle vertices so each sits at the given radius.
    anchor = _resolve_anchor_xy(rel, scene, terrain_extent)
    radius = float(p.get("radius", 5.0))
    if radius <= 0 or count < 1:
        raise UnsupportedRelation("surround needs radius > 0 and count >= 1")
    if count == 1:
        return LinearSpec(path=((anchor[0] + radius, anchor[1]), (anchor[0] + radius, anchor[1] + 1e-6)), spacing=1.0)
    verts = tuple(
        (
            anchor[0] + radius * math.cos(2.0 * math.pi * k / count),
            anchor[1] + radius * math.sin(2.0 * math.pi * k / count),
        )
        for k in range(count)
    )
    chord = math.hypot(verts[1][0] - verts[0][0], verts[1][1] - verts[0][1])
    return LinearSpec(path=verts, spacing=chord, lateral_offset=0.0, align_to_tangent=bool(p.get("face_tangent", False)))


def _resolve_anchor_xy(
    rel: SpatialRelation, scene: SceneGraph, terrain_extent: tuple[float, float] | None
) -> tuple[float, float]:
    region = scene.regions.get(rel.anchor)
    if region is not None:
        return region.centroid()
    pt = _anchor_point(scene, rel.anchor)
    if pt is not None:
        return pt
    if "anchor_position" in rel.params:
        ax, ay = rel.params["anchor_position"]
        return (float(ax), float(ay))
    raise UnknownAnchor(f"anchor {rel.anchor!r} not resolvable in the scene")


def project_to_terrain(placement: Placement, hf: Heightfield) -> Placement:
    """Snap each position's z to the terrain height at (x, y). Points outside
    the terrain extent are dropped and counted in meta."""
    kept: list[Transform] = []
    dropped = 0
    for tr in placement.transforms:
        try:
            z = sample_height(hf, tr.position.x, tr.position.y)
        except OutOfBounds:
            dropped += 1
            continue
        kept.append(Transform(position=Vec3(tr.position.x, tr.position.y, z), rotation=tr.rotation, scale=tr.scale))
    meta = dict(placement.meta)
    meta["projected"] = True
    if dropped:
        meta["dropped_out_of_bounds"] = dropped
    return Placement(transforms=kept, meta=meta)
