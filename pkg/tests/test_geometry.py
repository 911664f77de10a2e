"""Vector/AABB/framing-camera math."""

import math
import random

import pytest

from scenesmith.geometry import (
    Aabb,
    EmptyInput,
    Transform,
    Vec3,
    compute_aabb,
    compute_framing_camera,
    look_at_rotation,
    rotation_matrix_xyz,
)


def test_aabb_single_point():
    box = compute_aabb([Vec3(0, 0, 0)])
    assert box.min == box.max == Vec3(0, 0, 0)


def test_aabb_unit_cube_corners():
    corners = [Vec3(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    box = compute_aabb(corners)
    assert box.min == Vec3(0, 0, 0)
    assert box.max == Vec3(1, 1, 1)


def test_aabb_matches_scan_oracle():
    rng = random.Random(123)
    points = [Vec3(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)) for _ in range(1000)]
    box = compute_aabb(points)
    # independent componentwise scan
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    zs = [p.z for p in points]
    assert box.min == Vec3(min(xs), min(ys), min(zs))
    assert box.max == Vec3(max(xs), max(ys), max(zs))


def test_aabb_empty_raises():
    with pytest.raises(EmptyInput):
        compute_aabb([])


def test_aabb_min_above_max_rejected():
    with pytest.raises(ValueError):
        Aabb(Vec3(1, 0, 0), Vec3(0, 1, 1))


class TestFramingCamera:
    UNIT_CUBE = Aabb(Vec3(0, 0, 0), Vec3(1, 1, 1))

    def test_unit_cube_distance(self):
        # sphere-fit: r = sqrt(3)/2, d = r / sin(30 deg) = 0.8660 / 0.5
        cam = compute_framing_camera(self.UNIT_CUBE, 60.0, 1.0, Vec3(0, -1, 0))
        d = (cam.position - self.UNIT_CUBE.center).norm()
        assert d == pytest.approx(1.7321, abs=1e-4)

    def test_margin_doubles_distance(self):
        cam1 = compute_framing_camera(self.UNIT_CUBE, 60.0, 1.0, Vec3(0, -1, 0))
        cam2 = compute_framing_camera(self.UNIT_CUBE, 60.0, 2.0, Vec3(0, -1, 0))
        d1 = (cam1.position - self.UNIT_CUBE.center).norm()
        d2 = (cam2.position - self.UNIT_CUBE.center).norm()
        assert d2 == pytest.approx(2.0 * d1, rel=1e-12)

    def test_translated_box_targets_center(self):
        box = Aabb(Vec3(10, -4, 7), Vec3(12, 0, 9))
        view = Vec3(1, 2, -0.5).normalized()
        cam = compute_framing_camera(box, 45.0, 1.5, view)
        d = (cam.position - box.center).norm()
        target = cam.position + view * d
        assert (target - box.center).norm() < 1e-9

    def test_degenerate_box_uses_epsilon_radius(self):
        cam = compute_framing_camera(Aabb(Vec3(1, 1, 1), Vec3(1, 1, 1)), 60.0, 1.0, Vec3(0, -1, 0))
        assert (cam.position - Vec3(1, 1, 1)).norm() > 0

    def test_fov_bounds(self):
        with pytest.raises(ValueError):
            compute_framing_camera(self.UNIT_CUBE, 0.0, 1.0, Vec3(0, -1, 0))
        with pytest.raises(ValueError):
            compute_framing_camera(self.UNIT_CUBE, 180.0, 1.0, Vec3(0, -1, 0))
        with pytest.raises(ValueError):
            compute_framing_camera(self.UNIT_CUBE, 60.0, 0.5, Vec3(0, -1, 0))


def _camera_axes(rotation_deg: Vec3):
    m = rotation_matrix_xyz(rotation_deg)
    right = Vec3(m[0][0], m[1][0], m[2][0])
    up = Vec3(m[0][1], m[1][1], m[2][1])
    forward = Vec3(-m[0][2], -m[1][2], -m[2][2])  # camera looks along local -Z
    return right, up, forward


def test_look_at_rotation_reproduces_forward():
    rng = random.Random(7)
    for _ in range(200):
        v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
        if v.norm() < 1e-3:
            continue
        f = v.normalized()
        _, _, forward = _camera_axes(look_at_rotation(f))
        assert (forward - f).norm() < 1e-9


def test_look_at_straight_down():
    _, _, forward = _camera_axes(look_at_rotation(Vec3(0, 0, -1)))
    assert (forward - Vec3(0, 0, -1)).norm() < 1e-9


def test_all_corners_inside_frustum():
    # every AABB corner must project inside a square frustum for margin >= 1
    rng = random.Random(99)
    for _ in range(300):
        lo = Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20))
        ext = Vec3(rng.uniform(0.01, 15), rng.uniform(0.01, 15), rng.uniform(0.01, 15))
        box = Aabb(lo, lo + ext)
        fov = rng.uniform(20.0, 120.0)
        margin = rng.uniform(1.0, 3.0)
        view = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
        if view.norm() < 1e-3:
            view = Vec3(0, -1, 0)
        cam = compute_framing_camera(box, fov, margin, view)
        right, up, forward = _camera_axes(cam.rotation)
        half_tan = math.tan(math.radians(fov) / 2.0)
        for corner in box.corners():
            w = corner - cam.position
            depth = w.dot(forward)
            assert depth > 0, "corner behind the camera"
            limit = half_tan * depth + 1e-9
            assert abs(w.dot(right)) <= limit
            assert abs(w.dot(up)) <= limit


def test_transform_validation():
    Transform().validate()
    with pytest.raises(ValueError):
        Transform(scale=Vec3(1, 0, 1)).validate()
    with pytest.raises(ValueError):
        Transform(rotation=Vec3(0, 400, 0)).validate()
