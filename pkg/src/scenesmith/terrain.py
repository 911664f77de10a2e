"""Seeded heightfield synthesis: slope plane + value-noise fBm + valley carving.

The height at (x, y) is

    h = base_elevation
        + slope * (x*cos(dir) + y*sin(dir))
        + elevation_range * roughness * fbm(x, y)
        - valley_carve(x, y)

where fbm is normalized to [0, 1). With roughness 0 and no valley the field
is exactly the inclined plane.

Noise scheme (fixed, reimplementable from this comment alone):
  * lattice cell size at octave 0 is max(size_x, size_y) / 4; octave i scales
    coordinates by 2**i and attenuates amplitude by 0.5**i,
  * octave seed:   oseed_i = splitmix64(seed XOR i)
  * corner value:  v(ix, iy) = splitmix64(splitmix64(oseed_i XOR ix) XOR iy)
                   mapped to [0, 1) via the top 53 bits,
  * bilinear interpolation with smoothstep-eased fractions t*t*(3-2*t),
  * fbm = sum_i 0.5**i * octave_i / sum_i 0.5**i.

Everything is a pure function of (params, seed): repeated generation is
byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SceneSmithError
from .rng import MASK64, splitmix64

_BASE_CELLS = 4.0  # lattice cells across the larger extent at octave 0
_NODE_SNAP = 1e-9  # sample queries this close to a grid node hit it exactly

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


class InvalidParams(SceneSmithError):
    code = "invalid_params"


class OutOfBounds(SceneSmithError):
    code = "out_of_bounds"


@dataclass(frozen=True)
class ValleySpec:
    """Valley carved along a polyline: full depth on the centerline, smooth
    falloff to zero at lateral distance >= width."""

    path: tuple[tuple[float, float], ...]
    depth: float
    width: float

    def to_dict(self) -> dict:
        return {
            "path": [[float(x), float(y)] for x, y in self.path],
            "depth": float(self.depth),
            "width": float(self.width),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValleySpec":
        return cls(
            path=tuple((float(x), float(y)) for x, y in d["path"]),
            depth=float(d["depth"]),
            width=float(d["width"]),
        )


@dataclass(frozen=True)
class TerrainParams:
    size_x: float
    size_y: float
    resolution: int = 65
    base_elevation: float = 0.0
    elevation_range: float = 0.0
    slope: float = 0.0
    slope_direction_deg: float = 0.0
    roughness: float = 0.0
    octaves: int = 4
    valley: ValleySpec | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.size_x <= 0 or self.size_y <= 0:
            raise InvalidParams("terrain size must be positive")
        if self.resolution < 2:
            raise InvalidParams("resolution must be >= 2")
        if self.elevation_range < 0:
            raise InvalidParams("elevation_range must be >= 0")
        if not 0.0 <= self.roughness <= 1.0:
            raise InvalidParams("roughness must lie in [0, 1]")
        if self.octaves < 1:
            raise InvalidParams("octaves must be >= 1")
        if self.valley is not None:
            if self.valley.width <= 0:
                raise InvalidParams("valley width must be > 0")
            if self.valley.depth < 0:
                raise InvalidParams("valley depth must be >= 0")
            if len(self.valley.path) == 0:
                raise InvalidParams("valley path must have at least one vertex")

    def to_dict(self) -> dict:
        return {
            "size_x": float(self.size_x),
            "size_y": float(self.size_y),
            "resolution": int(self.resolution),
            "base_elevation": float(self.base_elevation),
            "elevation_range": float(self.elevation_range),
            "slope": float(self.slope),
            "slope_direction_deg": float(self.slope_direction_deg),
            "roughness": float(self.roughness),
            "octaves": int(self.octaves),
            "seed": int(self.seed),
            "valley": self.valley.to_dict() if self.valley else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TerrainParams":
        valley = ValleySpec.from_dict(d["valley"]) if d.get("valley") else None
        return cls(
            size_x=float(d["size_x"]),
            size_y=float(d["size_y"]),
            resolution=int(d["resolution"]),
            base_elevation=float(d.get("base_elevation", 0.0)),
            elevation_range=float(d.get("elevation_range", 0.0)),
            slope=float(d.get("slope", 0.0)),
            slope_direction_deg=float(d.get("slope_direction_deg", 0.0)),
            roughness=float(d.get("roughness", 0.0)),
            octaves=int(d.get("octaves", 4)),
            valley=valley,
            seed=int(d.get("seed", 0)),
        )


@dataclass
class Heightfield:
    """Regular grid of heights over [0, size_x] x [0, size_y].

    heights[iy, ix] is the height at (ix * dx, iy * dy), row-major in y.
    """

    size_x: float
    size_y: float
    resolution: int
    heights: np.ndarray
    tags: list[str] = field(default_factory=list)

    @property
    def dx(self) -> float:
        return self.size_x / (self.resolution - 1)

    @property
    def dy(self) -> float:
        return self.size_y / (self.resolution - 1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Heightfield):
            return NotImplemented
        return (
            self.size_x == other.size_x
            and self.size_y == other.size_y
            and self.resolution == other.resolution
            and self.tags == other.tags
            and np.array_equal(self.heights, other.heights)
        )

    def to_dict(self) -> dict:
        return {
            "size_x": float(self.size_x),
            "size_y": float(self.size_y),
            "resolution": int(self.resolution),
            "heights": [[float(h) for h in row] for row in self.heights],
            "tags": list(self.tags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Heightfield":
        hf = cls(
            size_x=float(d["size_x"]),
            size_y=float(d["size_y"]),
            resolution=int(d["resolution"]),
            heights=np.array(d["heights"], dtype=np.float64),
            tags=list(d.get("tags", [])),
        )
        if hf.heights.shape != (hf.resolution, hf.resolution):
            raise InvalidParams("heights grid does not match resolution")
        return hf

    def mesh(self) -> tuple[list[tuple[float, float, float]], list[tuple[int, int, int, int]]]:
        """Grid mesh: resolution**2 vertices, quad faces, 0-based indices."""
        res = self.resolution
        verts = [
            (ix * self.dx, iy * self.dy, float(self.heights[iy, ix]))
            for iy in range(res)
            for ix in range(res)
        ]
        faces = []
        for iy in range(res - 1):
            for ix in range(res - 1):
                a = iy * res + ix
                faces.append((a, a + 1, a + res + 1, a + res))
        return verts, faces


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


def _splitmix64_vec(x: np.ndarray) -> np.ndarray:
    return _mix64(x + _GOLDEN)


def _lattice01(ix: np.ndarray, iy: np.ndarray, oseed: int) -> np.ndarray:
    """Corner value in [0, 1) from integer lattice coordinates."""
    h = _splitmix64_vec(_splitmix64_vec(_U64(oseed) ^ ix.astype(np.uint64)) ^ iy.astype(np.uint64))
    return (h >> _U64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _smooth(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise(u: np.ndarray, v: np.ndarray, oseed: int) -> np.ndarray:
    ix = np.floor(u).astype(np.int64)
    iy = np.floor(v).astype(np.int64)
    fx = u - ix
    fy = v - iy
    v00 = _lattice01(ix, iy, oseed)
    v10 = _lattice01(ix + 1, iy, oseed)
    v01 = _lattice01(ix, iy + 1, oseed)
    v11 = _lattice01(ix + 1, iy + 1, oseed)
    sx = _smooth(fx)
    sy = _smooth(fy)
    top = v00 + (v10 - v00) * sx
    bot = v01 + (v11 - v01) * sx
    return top + (bot - top) * sy


def fbm_grid(x: np.ndarray, y: np.ndarray, seed: int, octaves: int, cell0: float) -> np.ndarray:
    """Normalized fractional Brownian motion in [0, 1)."""
    total = np.zeros_like(x)
    norm = 0.0
    amp = 1.0
    for i in range(octaves):
        oseed = splitmix64((seed ^ i) & MASK64)
        freq = float(2**i)
        total += amp * _value_noise(x / cell0 * freq, y / cell0 * freq, oseed)
        norm += amp
        amp *= 0.5
    return total / norm


def _polyline_distance(px: np.ndarray, py: np.ndarray, path: Sequence[tuple[float, float]]) -> np.ndarray:
    """Distance from each (px, py) to the nearest point of the polyline."""
    best = np.full(px.shape, np.inf)
    pts = list(path)
    if len(pts) == 1:
        ax, ay = pts[0]
        return np.hypot(px - ax, py - ay)
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            d = np.hypot(px - ax, py - ay)
        else:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
            d = np.hypot(px - (ax + t * dx), py - (ay + t * dy))
        best = np.minimum(best, d)
    return best


def carve_valley(hf: Heightfield, path: Sequence[tuple[float, float]], depth: float, width: float) -> Heightfield:
    """New heightfield lowered by depth * falloff(d / width) around the path.

    falloff(t) = 1 - (3t^2 - 2t^3) clamped to [0, 1]: exactly ``depth`` on the
    centerline, zero at distance >= width, smooth and monotone in between.
    """
    if width <= 0:
        raise InvalidParams("valley width must be > 0")
    if depth < 0:
        raise InvalidParams("valley depth must be >= 0")
    pts = [p for p in path]
    if not pts:
        raise InvalidParams("valley path must have at least one vertex")
    for x, y in pts:
        if not (0.0 <= x <= hf.size_x and 0.0 <= y <= hf.size_y):
            raise InvalidParams("valley path must lie within the terrain extent")
    res = hf.resolution
    xs = np.arange(res, dtype=np.float64) * hf.dx
    ys = np.arange(res, dtype=np.float64) * hf.dy
    gx, gy = np.meshgrid(xs, ys)
    t = np.clip(_polyline_distance(gx, gy, pts) / width, 0.0, 1.0)
    falloff = 1.0 - (3.0 * t * t - 2.0 * t * t * t)
    return Heightfield(
        size_x=hf.size_x,
        size_y=hf.size_y,
        resolution=res,
        heights=hf.heights - depth * falloff,
        tags=list(hf.tags),
    )


def generate_heightfield(params: TerrainParams) -> Heightfield:
    params.validate()
    res = params.resolution
    xs = np.linspace(0.0, params.size_x, res)
    ys = np.linspace(0.0, params.size_y, res)
    gx, gy = np.meshgrid(xs, ys)

    theta = math.radians(params.slope_direction_deg)
    heights = params.base_elevation + params.slope * (gx * math.cos(theta) + gy * math.sin(theta))

    if params.roughness > 0.0 and params.elevation_range > 0.0:
        cell0 = max(params.size_x, params.size_y) / _BASE_CELLS
        noise = fbm_grid(gx, gy, params.seed & MASK64, params.octaves, cell0)
        heights = heights + params.elevation_range * params.roughness * noise

    hf = Heightfield(size_x=params.size_x, size_y=params.size_y, resolution=res, heights=heights)
    if params.valley is not None:
        hf = carve_valley(hf, params.valley.path, params.valley.depth, params.valley.width)
    return hf


def sample_height(hf: Heightfield, x: float, y: float) -> float:
    """Bilinear interpolation; exact at grid nodes.

    Raises OutOfBounds outside [0, size_x] x [0, size_y] (with a 1e-9 slack
    for floating-point edge queries).
    """
    if not (-_NODE_SNAP <= x <= hf.size_x + _NODE_SNAP and -_NODE_SNAP <= y <= hf.size_y + _NODE_SNAP):
        raise OutOfBounds(f"({x}, {y}) outside terrain extent {hf.size_x} x {hf.size_y}")
    gx = min(max(x, 0.0), hf.size_x) / hf.dx
    gy = min(max(y, 0.0), hf.size_y) / hf.dy
    if abs(gx - round(gx)) < _NODE_SNAP:
        gx = float(round(gx))
    if abs(gy - round(gy)) < _NODE_SNAP:
        gy = float(round(gy))
    res = hf.resolution
    ix = min(int(gx), res - 2) if gx < res - 1 else res - 2
    iy = min(int(gy), res - 2) if gy < res - 1 else res - 2
    fx = gx - ix
    fy = gy - iy
    h = hf.heights
    # The fraction-0/1 branches keep node and edge queries exact (no lerp
    # rounding), which terrain projection relies on.
    if fx == 0.0:
        top, bot = float(h[iy, ix]), float(h[iy + 1, ix])
    elif fx == 1.0:
        top, bot = float(h[iy, ix + 1]), float(h[iy + 1, ix + 1])
    else:
        top = float(h[iy, ix] + (h[iy, ix + 1] - h[iy, ix]) * fx)
        bot = float(h[iy + 1, ix] + (h[iy + 1, ix + 1] - h[iy + 1, ix]) * fx)
    if fy == 0.0:
        return top
    if fy == 1.0:
        return bot
    return float(top + (bot - top) * fy)
