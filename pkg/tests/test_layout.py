"""The five layout generators and relation resolution."""

import math

import numpy as np
import pytest

from scenesmith.geometry import Vec3
from scenesmith.layout import (
    AreaFillSpec,
    ChildRegionEscapesParent,
    DegeneratePath,
    GridSpec,
    InvalidSpec,
    LinearSpec,
    NestedSpec,
    Placement,
    ScatterSpec,
    SpatialRelation,
    UnknownAnchor,
    UnsupportedRelation,
    generate,
    grid,
    linear,
    nested,
    area_fill,
    project_to_terrain,
    resolve_relation,
    scatter,
    spec_from_dict,
    spec_to_dict,
)
from scenesmith.scene import AssetInstance, DiscRegion, RectRegion, SceneGraph
from scenesmith.terrain import Heightfield, TerrainParams, generate_heightfield


def _positions(p: Placement):
    return [(t.position.x, t.position.y) for t in p.transforms]


class TestScatter:
    def test_count_zero(self):
        p = scatter(ScatterSpec(region=RectRegion(0, 0, 10, 10), count=0, min_separation=1.0, seed=1))
        assert len(p) == 0
        assert p.meta["saturated"] is False

    def test_min_separation_holds_O_n2(self):
        spec = ScatterSpec(region=RectRegion(0, 0, 100, 100), count=50, min_separation=5.0, seed=7)
        p = scatter(spec)
        assert len(p) == 50
        pts = _positions(p)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = math.dist(pts[i], pts[j])
                assert d >= 5.0, f"pair {i},{j} at distance {d}"
        for x, y in pts:
            assert spec.region.contains(x, y)

    def test_saturation_reported(self):
        p = scatter(ScatterSpec(region=RectRegion(0, 0, 1, 1), count=5, min_separation=10.0, seed=3))
        assert len(p) == 1
        assert p.meta["saturated"] is True

    def test_deterministic_per_seed(self):
        spec = ScatterSpec(region=DiscRegion(0, 0, 20), count=30, min_separation=2.0, seed=11)
        assert _positions(scatter(spec)) == _positions(scatter(spec))

    def test_exclusions_honored(self):
        hole = DiscRegion(5, 5, 2)
        spec = ScatterSpec(region=RectRegion(0, 0, 10, 10), count=40, min_separation=0.5, seed=2, exclusions=(hole,))
        for x, y in _positions(scatter(spec)):
            assert not hole.contains(x, y)


class TestGrid:
    def test_exact_lattice(self):
        p = grid(GridSpec(origin=(0, 0), rows=2, cols=3, spacing=5.0, jitter=0.0))
        assert _positions(p) == [(0, 0), (5, 0), (10, 0), (0, 5), (5, 5), (10, 5)]

    def test_single_cell(self):
        p = grid(GridSpec(origin=(3, 4), rows=1, cols=1, spacing=2.0))
        assert _positions(p) == [(3, 4)]

    def test_jitter_bounded_chebyshev(self):
        p = grid(GridSpec(origin=(0, 0), rows=10, cols=10, spacing=4.0, jitter=1.0, seed=5))
        for k, (x, y) in enumerate(_positions(p)):
            lx = (k % 10) * 4.0
            ly = (k // 10) * 4.0
            assert abs(x - lx) <= 1.0 and abs(y - ly) <= 1.0

    def test_invalid(self):
        with pytest.raises(InvalidSpec):
            grid(GridSpec(origin=(0, 0), rows=0, cols=2, spacing=1.0))


class TestLinear:
    def test_straight_segment(self):
        p = linear(LinearSpec(path=((0, 0), (10, 0)), spacing=2.5))
        assert len(p) == 5
        got = [x for x, _ in _positions(p)]
        assert got == pytest.approx([0, 2.5, 5, 7.5, 10], abs=1e-9)

    def test_lateral_offset_perpendicular(self):
        # point-line distance oracle: offset points sit 1 m from the segment
        p = linear(LinearSpec(path=((0, 0), (10, 0)), spacing=2.5, lateral_offset=1.0))
        for x, y in _positions(p):
            assert abs(y - 1.0) < 1e-12  # left normal of +x tangent is +y

    def test_l_shaped_arc_walk(self):
        # independent oracle: walk 6 m along +x then 8 m along +y
        def oracle(s):
            if s <= 6:
                return (s, 0.0)
            return (6.0, s - 6.0)

        p = linear(LinearSpec(path=((0, 0), (6, 0), (6, 8)), spacing=7.0))
        assert len(p) == 3
        for (x, y), s in zip(_positions(p), [0.0, 7.0, 14.0]):
            ox, oy = oracle(s)
            assert math.hypot(x - ox, y - oy) < 1e-9
        # the middle point lies on the second leg
        assert _positions(p)[1] == pytest.approx((6.0, 1.0), abs=1e-9)

    def test_align_to_tangent(self):
        p = linear(LinearSpec(path=((0, 0), (0, 10)), spacing=5.0, align_to_tangent=True))
        for t in p.transforms:
            assert t.rotation.z == pytest.approx(90.0)

    def test_degenerate_path(self):
        with pytest.raises(DegeneratePath):
            linear(LinearSpec(path=((1, 1), (1, 1)), spacing=1.0))

    def test_duplicate_vertices_merged(self):
        p = linear(LinearSpec(path=((0, 0), (0, 0), (10, 0)), spacing=5.0))
        assert len(p) == 3


class TestNested:
    def test_single_child_identity(self):
        parent = RectRegion(0, 0, 20, 20)
        child = GridSpec(origin=(2, 2), rows=2, cols=2, spacing=3.0)
        p = nested(NestedSpec(parent=parent, children=(child,)))
        assert _positions(p) == _positions(grid(child))
        assert p.meta["child_index"] == [0, 0, 0, 0]

    def test_two_disjoint_children_no_cross_overlap(self):
        parent = RectRegion(0, 0, 100, 100)
        a = ScatterSpec(region=RectRegion(0, 0, 40, 40), count=20, min_separation=2.0, seed=1)
        b = ScatterSpec(region=RectRegion(60, 60, 100, 100), count=20, min_separation=2.0, seed=2)
        p = nested(NestedSpec(parent=parent, children=(a, b)))
        pts = _positions(p)
        idx = p.meta["child_index"]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if idx[i] != idx[j]:
                    assert math.dist(pts[i], pts[j]) >= 20.0  # separated by the 20 m gap

    def test_child_escapes_parent(self):
        parent = RectRegion(0, 0, 10, 10)
        child = ScatterSpec(region=RectRegion(5, 5, 15, 15), count=3, min_separation=1.0, seed=1)
        with pytest.raises(ChildRegionEscapesParent):
            nested(NestedSpec(parent=parent, children=(child,)))

    def test_regionless_child_post_checked(self):
        parent = RectRegion(0, 0, 10, 10)
        escaping = GridSpec(origin=(8, 8), rows=2, cols=2, spacing=5.0)
        with pytest.raises(ChildRegionEscapesParent):
            nested(NestedSpec(parent=parent, children=(escaping,)))

    def test_depth_cap(self):
        leaf = GridSpec(origin=(1, 1), rows=1, cols=1, spacing=1.0)
        lvl2 = NestedSpec(parent=RectRegion(0, 0, 10, 10), children=(leaf,))
        lvl3 = NestedSpec(parent=RectRegion(0, 0, 10, 10), children=(lvl2,))
        nested(lvl3)  # depth 3 allowed
        lvl4 = NestedSpec(parent=RectRegion(0, 0, 10, 10), children=(lvl3,))
        with pytest.raises(InvalidSpec):
            nested(lvl4)

    def test_composition_law(self):
        parent = RectRegion(0, 0, 50, 50)
        children = (
            GridSpec(origin=(1, 1), rows=2, cols=3, spacing=2.0),
            ScatterSpec(region=DiscRegion(30, 30, 10), count=8, min_separation=1.0, seed=9),
        )
        whole = nested(NestedSpec(parent=parent, children=children))
        concat = [p for c in children for p in _positions(generate(c))]
        assert _positions(whole) == concat


class TestAreaFill:
    def test_exact_tiling(self):
        p = area_fill(AreaFillSpec(region=RectRegion(0, 0, 10, 10), footprint=(2, 2), gap=0.0))
        assert len(p) == 25

    def test_gap_lattice_count(self):
        # floor((10-2)/3)+1 = 3 per axis
        p = area_fill(AreaFillSpec(region=RectRegion(0, 0, 10, 10), footprint=(2, 2), gap=1.0))
        assert len(p) == 9

    def test_footprint_larger_than_region(self):
        p = area_fill(AreaFillSpec(region=RectRegion(0, 0, 10, 10), footprint=(11, 11)))
        assert len(p) == 0
        assert p.meta["footprint_larger_than_region"] is True

    def test_footprints_fully_inside_disc(self):
        region = DiscRegion(0, 0, 10)
        p = area_fill(AreaFillSpec(region=region, footprint=(3, 2), gap=0.5))
        assert len(p) > 0
        for x, y in _positions(p):
            for dx in (-1.5, 1.5):
                for dy in (-1.0, 1.0):
                    assert region.contains(x + dx, y + dy)

    def test_footprints_disjoint_interval_check(self):
        p = area_fill(AreaFillSpec(region=RectRegion(0, 0, 20, 14), footprint=(3, 2), gap=0.25))
        boxes = [(x - 1.5, y - 1.0, x + 1.5, y + 1.0) for x, y in _positions(p)]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                overlap = a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]
                assert not overlap


class TestResolveRelation:
    def _scene_with_anchor(self):
        scene = SceneGraph()
        inst = AssetInstance(id="lake_0", asset_ref="asset:lake", tags={"lake"})
        scene.add_instance(inst)
        return scene

    def test_near_annulus(self):
        scene = self._scene_with_anchor()
        rel = SpatialRelation(subject="rock", kind="near", anchor="lake", params={"dist_min": 3, "dist_max": 5, "count": 4, "min_separation": 0.5})
        spec = resolve_relation(rel, scene, seed=3)
        p = generate(spec)
        assert len(p) == 4
        for x, y in _positions(p):
            r = math.hypot(x, y)
            assert 3.0 <= r <= 5.0 + 1e-9

    def test_surround_exact_circle(self):
        scene = self._scene_with_anchor()
        rel = SpatialRelation(subject="bench", kind="surround", anchor="lake", params={"radius": 10, "count": 4})
        spec = resolve_relation(rel, scene, seed=0)
        p = generate(spec)
        assert len(p) == 4
        expected = [(10, 0), (0, 10), (-10, 0), (0, -10)]
        for (x, y), (ex, ey) in zip(_positions(p), expected):
            assert math.hypot(x, y) == pytest.approx(10.0, abs=1e-6)
            assert (x, y) == pytest.approx((ex, ey), abs=1e-6)

    def test_avoid_whole_domain_saturates(self):
        scene = SceneGraph()
        scene.terrain = generate_heightfield(TerrainParams(size_x=10, size_y=10, resolution=3))
        scene.regions["blocked"] = RectRegion(0, 0, 10, 10)
        rel = SpatialRelation(subject="rock", kind="avoid", anchor="blocked", params={"count": 5, "min_separation": 0.5})
        spec = resolve_relation(rel, scene, seed=1)
        p = generate(spec)
        assert len(p) == 0
        assert p.meta["saturated"] is True

    def test_on_terrain_uses_extent(self):
        scene = SceneGraph()
        rel = SpatialRelation(subject="tree", kind="on", anchor="terrain", params={"count": 10, "min_separation": 1.0})
        spec = resolve_relation(rel, scene, seed=4, terrain_extent=(30.0, 20.0))
        p = generate(spec)
        assert len(p) == 10
        for x, y in _positions(p):
            assert 0 <= x <= 30 and 0 <= y <= 20

    def test_inside_named_region(self):
        scene = SceneGraph()
        scene.regions["garden"] = DiscRegion(5, 5, 3)
        rel = SpatialRelation(subject="flower", kind="inside", anchor="garden", params={"count": 6, "min_separation": 0.3})
        p = generate(resolve_relation(rel, scene, seed=5))
        for x, y in _positions(p):
            assert scene.regions["garden"].contains(x, y)

    def test_along_explicit_path(self):
        scene = SceneGraph()
        rel = SpatialRelation(subject="lamp", kind="along", anchor="road", params={"path": [[0, 0], [20, 0]], "spacing": 5.0})
        p = generate(resolve_relation(rel, scene, seed=0))
        assert len(p) == 5

    def test_unknown_anchor(self):
        with pytest.raises(UnknownAnchor):
            resolve_relation(SpatialRelation(subject="a", kind="near", anchor="ghost", params={"count": 1}), SceneGraph(), 0)

    def test_unsupported_kind(self):
        with pytest.raises(UnsupportedRelation):
            resolve_relation(SpatialRelation(subject="a", kind="besideish", anchor="b"), SceneGraph(), 0)


class TestProjectToTerrain:
    def test_flat_terrain(self):
        hf = generate_heightfield(TerrainParams(size_x=20, size_y=20, resolution=5, base_elevation=10.0))
        p = grid(GridSpec(origin=(2, 2), rows=2, cols=2, spacing=4.0))
        proj = project_to_terrain(p, hf)
        assert all(t.position.z == 10.0 for t in proj.transforms)
        assert proj.meta["projected"] is True

    def test_grid_node_exact(self):
        rng = np.random.default_rng(0)
        hf = Heightfield(size_x=10, size_y=10, resolution=6, heights=rng.uniform(0, 5, (6, 6)))
        p = grid(GridSpec(origin=(0, 0), rows=2, cols=2, spacing=2.0))
        proj = project_to_terrain(p, hf)
        assert proj.transforms[0].position.z == hf.heights[0, 0]

    def test_random_points_match_bilinear_oracle(self):
        rng = np.random.default_rng(21)
        hf = Heightfield(size_x=50, size_y=40, resolution=11, heights=rng.uniform(-3, 3, (11, 11)))

        def oracle(x, y):
            # independent bilinear reimplementation
            dx, dy = 50 / 10, 40 / 10
            ix = min(int(x / dx), 9)
            iy = min(int(y / dy), 9)
            fx, fy = x / dx - ix, y / dy - iy
            h = hf.heights
            return (
                h[iy, ix] * (1 - fx) * (1 - fy)
                + h[iy, ix + 1] * fx * (1 - fy)
                + h[iy + 1, ix] * (1 - fx) * fy
                + h[iy + 1, ix + 1] * fx * fy
            )

        pts = [(rng.uniform(0, 50), rng.uniform(0, 40)) for _ in range(100)]
        from scenesmith.geometry import Transform

        placement = Placement(transforms=[Transform(position=Vec3(x, y, 0)) for x, y in pts])
        proj = project_to_terrain(placement, hf)
        for (x, y), t in zip(pts, proj.transforms):
            assert t.position.z == pytest.approx(oracle(x, y), abs=1e-9)

    def test_out_of_bounds_dropped_with_flag(self):
        hf = generate_heightfield(TerrainParams(size_x=10, size_y=10, resolution=3, base_elevation=1.0))
        from scenesmith.geometry import Transform

        placement = Placement(transforms=[Transform(position=Vec3(5, 5, 0)), Transform(position=Vec3(50, 5, 0))])
        proj = project_to_terrain(placement, hf)
        assert len(proj) == 1
        assert proj.meta["dropped_out_of_bounds"] == 1


def test_spec_serialization_roundtrip():
    specs = [
        ScatterSpec(region=DiscRegion(1, 2, 3), count=7, min_separation=1.5, seed=4, exclusions=(RectRegion(0, 0, 1, 1),)),
        GridSpec(origin=(1.5, -2.0), rows=3, cols=4, spacing=2.5, jitter=0.5, seed=9),
        LinearSpec(path=((0, 0), (5, 5), (10, 0)), spacing=2.0, lateral_offset=-1.0, align_to_tangent=True),
        AreaFillSpec(region=RectRegion(0, 0, 12, 8), footprint=(2, 3), gap=0.5, orientation_deg=15.0),
        NestedSpec(parent=RectRegion(0, 0, 30, 30), children=(GridSpec(origin=(1, 1), rows=2, cols=2, spacing=3.0),)),
    ]
    for spec in specs:
        d = spec_to_dict(spec)
        back = spec_from_dict(d)
        assert spec_to_dict(back) == d
        assert _positions(generate(back)) == _positions(generate(spec))


def test_generators_pure_repeat_byte_identical():
    specs = [
        ScatterSpec(region=RectRegion(0, 0, 50, 50), count=25, min_separation=2.0, seed=13),
        GridSpec(origin=(0, 0), rows=4, cols=4, spacing=3.0, jitter=0.7, seed=13),
        LinearSpec(path=((0, 0), (11, 7)), spacing=1.7),
        AreaFillSpec(region=RectRegion(0, 0, 17, 9), footprint=(2, 2), gap=0.3),
    ]
    for spec in specs:
        a = generate(spec)
        b = generate(spec)
        assert [t.to_dict() for t in a.transforms] == [t.to_dict() for t in b.transforms]
