"""Standalone plan-json executor for the DCC side.

Replays a ``plan/1`` file into concrete instances (id, asset ref, transform)
and a terrain grid without importing the engine: the adapter's contract is
the wire format alone. Every algorithm here mirrors the documented schemes
(splitmix64 lattice noise, random.Random dart throwing, arc-length walks),
so replayed transforms agree with the engine's scene-json to well below the
1e-4 comparison tolerance.

Pure Python, no third-party dependencies: it must run inside Blender's
bundled interpreter.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_NODE_SNAP = 1e-9
_MERGE_EPS = 1e-9
_EDGE_EPS = 1e-9
SCATTER_ATTEMPTS_PER_POINT = 30


class PlanError(Exception):
    pass


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


# ---------------------------------------------------------------------------
# Terrain: value-noise fBm on a hashed lattice


def _corner(ix: int, iy: int, oseed: int) -> float:
    h = splitmix64((splitmix64((oseed ^ (ix & MASK64)) & MASK64) ^ (iy & MASK64)) & MASK64)
    return (h >> 11) * (1.0 / (1 << 53))


def _smooth(t: float) -> float:
    return t * t * (3.0 - 2.0 * t)


def _value_noise(u: float, v: float, oseed: int) -> float:
    ix, iy = math.floor(u), math.floor(v)
    fx, fy = u - ix, v - iy
    v00 = _corner(ix, iy, oseed)
    v10 = _corner(ix + 1, iy, oseed)
    v01 = _corner(ix, iy + 1, oseed)
    v11 = _corner(ix + 1, iy + 1, oseed)
    sx, sy = _smooth(fx), _smooth(fy)
    top = v00 + (v10 - v00) * sx
    bot = v01 + (v11 - v01) * sx
    return top + (bot - top) * sy


def _fbm(x: float, y: float, seed: int, octaves: int, cell0: float) -> float:
    total, norm, amp = 0.0, 0.0, 1.0
    for i in range(octaves):
        oseed = splitmix64((seed ^ i) & MASK64)
        freq = float(2**i)
        total += amp * _value_noise(x / cell0 * freq, y / cell0 * freq, oseed)
        norm += amp
        amp *= 0.5
    return total / norm


@dataclass
class Terrain:
    size_x: float
    size_y: float
    resolution: int
    heights: list[list[float]]

    @property
    def dx(self) -> float:
        return self.size_x / (self.resolution - 1)

    @property
    def dy(self) -> float:
        return self.size_y / (self.resolution - 1)

    def mesh(self):
        res = self.resolution
        verts = [
            (ix * self.dx, iy * self.dy, self.heights[iy][ix])
            for iy in range(res)
            for ix in range(res)
        ]
        faces = []
        for iy in range(res - 1):
            for ix in range(res - 1):
                a = iy * res + ix
                faces.append((a, a + 1, a + res + 1, a + res))
        return verts, faces


def _axis(size: float, res: int) -> list[float]:
    # matches numpy.linspace: uniform step, exact endpoint
    delta = size / (res - 1)
    xs = [i * delta for i in range(res)]
    xs[-1] = size
    return xs


def generate_terrain(params: dict) -> Terrain:
    res = int(params["resolution"])
    size_x = float(params["size_x"])
    size_y = float(params["size_y"])
    base = float(params.get("base_elevation", 0.0))
    slope = float(params.get("slope", 0.0))
    theta = math.radians(float(params.get("slope_direction_deg", 0.0)))
    roughness = float(params.get("roughness", 0.0))
    elevation_range = float(params.get("elevation_range", 0.0))
    octaves = int(params.get("octaves", 4))
    seed = int(params.get("seed", 0)) & MASK64

    xs = _axis(size_x, res)
    ys = _axis(size_y, res)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    heights = [[base + slope * (x * cos_t + y * sin_t) for x in xs] for y in ys]
    if roughness > 0.0 and elevation_range > 0.0:
        cell0 = max(size_x, size_y) / 4.0
        for iy, y in enumerate(ys):
            row = heights[iy]
            for ix, x in enumerate(xs):
                row[ix] = row[ix] + elevation_range * roughness * _fbm(x, y, seed, octaves, cell0)

    valley = params.get("valley")
    if valley:
        heights = _carve(heights, xs, ys, valley)
    return Terrain(size_x=size_x, size_y=size_y, resolution=res, heights=heights)


def _segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _carve(heights, xs, ys, valley: dict):
    path = [(float(x), float(y)) for x, y in valley["path"]]
    depth = float(valley["depth"])
    width = float(valley["width"])
    out = []
    for iy, y in enumerate(ys):
        row = []
        for ix, x in enumerate(xs):
            if len(path) == 1:
                d = math.hypot(x - path[0][0], y - path[0][1])
            else:
                d = min(_segment_distance(x, y, *a, *b) for a, b in zip(path, path[1:]))
            t = min(max(d / width, 0.0), 1.0)
            falloff = 1.0 - (3.0 * t * t - 2.0 * t * t * t)
            row.append(heights[iy][ix] - depth * falloff)
        out.append(row)
    return out


def sample_height(terrain: Terrain, x: float, y: float) -> float:
    if not (-_NODE_SNAP <= x <= terrain.size_x + _NODE_SNAP and -_NODE_SNAP <= y <= terrain.size_y + _NODE_SNAP):
        raise PlanError(f"({x}, {y}) outside the terrain extent")
    gx = min(max(x, 0.0), terrain.size_x) / terrain.dx
    gy = min(max(y, 0.0), terrain.size_y) / terrain.dy
    if abs(gx - round(gx)) < _NODE_SNAP:
        gx = float(round(gx))
    if abs(gy - round(gy)) < _NODE_SNAP:
        gy = float(round(gy))
    res = terrain.resolution
    ix = min(int(gx), res - 2) if gx < res - 1 else res - 2
    iy = min(int(gy), res - 2) if gy < res - 1 else res - 2
    fx, fy = gx - ix, gy - iy
    h = terrain.heights
    if fx == 0.0:
        top, bot = h[iy][ix], h[iy + 1][ix]
    elif fx == 1.0:
        top, bot = h[iy][ix + 1], h[iy + 1][ix + 1]
    else:
        top = h[iy][ix] + (h[iy][ix + 1] - h[iy][ix]) * fx
        bot = h[iy + 1][ix] + (h[iy + 1][ix + 1] - h[iy + 1][ix]) * fx
    if fy == 0.0:
        return top
    if fy == 1.0:
        return bot
    return top + (bot - top) * fy


# ---------------------------------------------------------------------------
# Regions and layout generators


def _region_contains(region: dict, x: float, y: float) -> bool:
    kind = region["kind"]
    if kind == "rectangle":
        return region["x_min"] <= x <= region["x_max"] and region["y_min"] <= y <= region["y_max"]
    if kind == "disc":
        return math.hypot(x - region["cx"], y - region["cy"]) <= region["radius"] + _EDGE_EPS
    if kind == "polygon":
        verts = [(float(a), float(b)) for a, b in region["vertices"]]
        if _on_boundary(verts, x, y):
            return True
        return _ray_cast(verts, x, y)
    raise PlanError(f"unknown region kind {kind!r}")


def _on_boundary(verts, x, y):
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        if _segment_distance(x, y, ax, ay, bx, by) <= _EDGE_EPS:
            return True
    return False


def _ray_cast(verts, x, y):
    inside = False
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        if (ay > y) != (by > y):
            t = (y - ay) / (by - ay)
            if x < ax + t * (bx - ax):
                inside = not inside
    return inside


def _region_bounds(region: dict):
    kind = region["kind"]
    if kind == "rectangle":
        return region["x_min"], region["y_min"], region["x_max"], region["y_max"]
    if kind == "disc":
        return (
            region["cx"] - region["radius"],
            region["cy"] - region["radius"],
            region["cx"] + region["radius"],
            region["cy"] + region["radius"],
        )
    xs = [v[0] for v in region["vertices"]]
    ys = [v[1] for v in region["vertices"]]
    return min(xs), min(ys), max(xs), max(ys)


def _region_random_point(region: dict, rng: random.Random):
    kind = region["kind"]
    if kind == "rectangle":
        return rng.uniform(region["x_min"], region["x_max"]), rng.uniform(region["y_min"], region["y_max"])
    if kind == "disc":
        r = region["radius"] * math.sqrt(rng.random())
        a = rng.uniform(0.0, 2.0 * math.pi)
        return region["cx"] + r * math.cos(a), region["cy"] + r * math.sin(a)
    x_min, y_min, x_max, y_max = _region_bounds(region)
    for _ in range(10_000):
        x = rng.uniform(x_min, x_max)
        y = rng.uniform(y_min, y_max)
        if _region_contains(region, x, y):
            return x, y
    raise PlanError("failed to sample a point inside the polygon")


def _pt(x: float, y: float, yaw: float = 0.0) -> dict:
    return {"position": [x, y, 0.0], "rotation": [0.0, 0.0, yaw], "scale": [1.0, 1.0, 1.0]}


def _gen_scatter(spec: dict) -> list[dict]:
    count = int(spec["count"])
    min_sep = float(spec["min_separation"])
    rng = random.Random(int(spec.get("seed", 0)))
    exclusions = spec.get("exclusions", [])
    accepted: list[tuple[float, float]] = []
    min_sep2 = min_sep * min_sep
    budget = SCATTER_ATTEMPTS_PER_POINT * count
    attempts = 0
    while len(accepted) < count and attempts < budget:
        attempts += 1
        x, y = _region_random_point(spec["region"], rng)
        if any(_region_contains(excl, x, y) for excl in exclusions):
            continue
        if any((x - ax) ** 2 + (y - ay) ** 2 < min_sep2 for ax, ay in accepted):
            continue
        accepted.append((x, y))
    return [_pt(x, y) for x, y in accepted]


def _gen_grid(spec: dict) -> list[dict]:
    jitter = float(spec.get("jitter", 0.0))
    rng = random.Random(int(spec.get("seed", 0))) if jitter > 0 else None
    ox, oy = spec["origin"]
    spacing = float(spec["spacing"])
    out = []
    for row in range(int(spec["rows"])):
        for col in range(int(spec["cols"])):
            x = ox + col * spacing
            y = oy + row * spacing
            if rng is not None:
                x += rng.uniform(-jitter, jitter)
                y += rng.uniform(-jitter, jitter)
            out.append(_pt(x, y))
    return out


def _gen_linear(spec: dict) -> list[dict]:
    merged: list[tuple[float, float]] = []
    for px, py in spec["path"]:
        p = (float(px), float(py))
        if merged and math.hypot(p[0] - merged[-1][0], p[1] - merged[-1][1]) < _MERGE_EPS:
            continue
        merged.append(p)
    if len(merged) < 2:
        raise PlanError("degenerate linear path")
    lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(merged, merged[1:])]
    total = sum(lengths)
    spacing = float(spec["spacing"])
    offset = float(spec.get("lateral_offset", 0.0))
    align = bool(spec.get("align_to_tangent", False))
    count = int(math.floor(total / spacing + 1e-9)) + 1
    out = []
    for i in range(count):
        s = max(0.0, min(i * spacing, total))
        for idx, seg in enumerate(lengths):
            if s <= seg or idx == len(lengths) - 1:
                ax, ay = merged[idx]
                bx, by = merged[idx + 1]
                t = 0.0 if seg == 0 else min(1.0, s / seg)
                tx, ty = (bx - ax) / seg, (by - ay) / seg
                x = ax + t * (bx - ax) + -ty * offset
                y = ay + t * (by - ay) + tx * offset
                yaw = math.degrees(math.atan2(ty, tx)) if align else 0.0
                out.append(_pt(x, y, yaw))
                break
            s -= seg
    return out


def _gen_area_fill(spec: dict) -> list[dict]:
    w, h = (float(v) for v in spec["footprint"])
    gap = float(spec.get("gap", 0.0))
    theta = math.radians(float(spec.get("orientation_deg", 0.0)))
    ew = abs(w * math.cos(theta)) + abs(h * math.sin(theta))
    eh = abs(w * math.sin(theta)) + abs(h * math.cos(theta))
    x_min, y_min, x_max, y_max = _region_bounds(spec["region"])
    out = []
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
            if all(_region_contains(spec["region"], x, y) for x, y in corners) and _region_contains(
                spec["region"], cx, cy
            ):
                out.append(_pt(cx, cy, float(spec.get("orientation_deg", 0.0))))
            cx += ew + gap
        cy += eh + gap
    return out


def generate_layout(spec: dict) -> list[dict]:
    kind = spec.get("kind")
    if kind == "scatter":
        return _gen_scatter(spec)
    if kind == "grid":
        return _gen_grid(spec)
    if kind == "linear":
        return _gen_linear(spec)
    if kind == "area_fill":
        return _gen_area_fill(spec)
    if kind == "nested":
        out = []
        for child in spec["children"]:
            out.extend(generate_layout(child))
        return out
    raise PlanError(f"unknown layout kind {kind!r}")


# ---------------------------------------------------------------------------
# Plan replay


@dataclass
class ReplayResult:
    instances: list[dict] = field(default_factory=list)  # {id, asset_ref, transform, projected}
    terrain: Terrain | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "object"


def _next_index(instances: list[dict], slug: str) -> int:
    pattern = re.compile(re.escape(slug) + r"_(\d+)$")
    best = -1
    for inst in instances:
        m = pattern.match(inst["id"])
        if m:
            best = max(best, int(m.group(1)))
    return best + 1


def replay_plan(plan: dict) -> ReplayResult:
    if plan.get("schema") != "plan/1":
        raise PlanError(f"unsupported plan schema {plan.get('schema')!r}")
    result = ReplayResult()
    pending: dict[str, dict] = {}

    for action in plan.get("actions", []):
        kind = action.get("kind")
        if kind == "generate_terrain":
            result.terrain = generate_terrain(action["params"])
        elif kind == "invoke_api":
            object_name = action.get("object_ref") or action["plugin"]
            source = {"asset_ref": f"plugin:{action['plugin']}"}
            if action.get("layout_ref"):
                pending[action["layout_ref"]] = source
                continue
            count = int(action.get("count", 1))
            if count == 0:
                result.metadata[f"invoke:{action['plugin']}"] = json.dumps(
                    action.get("values", {}), sort_keys=True
                )
                continue
            slug = _slug(object_name)
            start = _next_index(result.instances, slug)
            for k in range(count):
                result.instances.append(
                    {
                        "id": f"{slug}_{start + k}",
                        "asset_ref": source["asset_ref"],
                        "transform": _pt(0.0, 0.0),
                        "projected": False,
                    }
                )
        elif kind == "import_asset":
            object_name = action.get("object_ref") or action["asset_id"]
            source = {"asset_ref": f"asset:{action['asset_id']}"}
            if action.get("layout_ref"):
                pending[action["layout_ref"]] = source
                continue
            transform = action.get("transform")
            if transform is None:
                result.warnings.append(f"import of {action['asset_id']} has neither transform nor layout")
                continue
            slug = _slug(object_name)
            idx = _next_index(result.instances, slug)
            result.instances.append(
                {
                    "id": f"{slug}_{idx}",
                    "asset_ref": source["asset_ref"],
                    "transform": dict(transform),
                    "projected": False,
                }
            )
        elif kind == "place_layout":
            object_ref = action["object_ref"]
            transforms = generate_layout(action["layout"])
            projected = bool(action.get("project_to_terrain"))
            if projected:
                if result.terrain is None:
                    result.warnings.append(f"layout for {object_ref} wants terrain but none was generated")
                    continue
                kept = []
                for tr in transforms:
                    x, y = tr["position"][0], tr["position"][1]
                    try:
                        z = sample_height(result.terrain, x, y)
                    except PlanError:
                        continue
                    tr = dict(tr)
                    tr["position"] = [x, y, z]
                    kept.append(tr)
                transforms = kept
            source = pending.get(object_ref, {"asset_ref": object_ref})
            slug = _slug(object_ref)
            start = _next_index(result.instances, slug)
            for k, tr in enumerate(transforms):
                result.instances.append(
                    {
                        "id": f"{slug}_{start + k}",
                        "asset_ref": source["asset_ref"],
                        "transform": tr,
                        "projected": projected,
                    }
                )
        else:
            result.warnings.append(f"unknown action kind {kind!r} skipped")
    return result


def load_plan(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
