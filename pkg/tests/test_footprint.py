import numpy as np
import pytest

from benthicvpr.errors import DegenerateRing, DimensionMismatch, InsufficientValidCells
from benthicvpr.footprint import (
    CornerRangeSpec,
    Footprint2D,
    Footprint3D,
    corner_fov,
    corner_pixels,
    corner_ranges,
    estimate_footprint,
    flatten,
    intersection_area,
    iou,
)
from benthicvpr.fusion import RangeMap
from benthicvpr.geodesy import GeodeticPoint, LocalFrame
from benthicvpr.geometry import CameraView, Intrinsics, RigidTransform, rotation_about_axis

FRAME = LocalFrame(GeodeticPoint(-33.84, 151.25, -20.0))
INTR = Intrinsics.from_fov(640, 480, np.radians(45), np.radians(34))
# camera x -> vehicle starboard, camera y -> vehicle aft, camera z -> down
NADIR = RigidTransform(np.array([[0.0, 1, 0], [-1, 0, 0], [0, 0, 1]]), np.zeros(3))


def view_at(p, yaw=0.0, vid="v"):
    R_v_to_l = rotation_about_axis([0, 0, 1], yaw)
    return CameraView(vid, "V", "cam", RigidTransform(R_v_to_l.T, -R_v_to_l.T @ np.asarray(p, float)))


def test_corner_ranges_examples(rng):
    m = RangeMap.constant(100, 80, 2.0)
    assert np.array_equal(corner_ranges(m), [2, 2, 2, 2])

    v = np.full((80, 100), 2.0)
    vals = rng.permutation(np.arange(1.0, 901.0))
    v[-30:, -30:] = vals.reshape(30, 30)
    v[-30:, -30:][rng.random((30, 30)) < 0.3] = np.nan
    keep = np.sort(v[-30:, -30:][np.isfinite(v[-30:, -30:])])
    n = len(keep)
    med = keep[n // 2] if n % 2 else 0.5 * (keep[n // 2 - 1] + keep[n // 2])
    assert corner_ranges(RangeMap(v))[2] == med

    v = np.full((80, 100), 2.0)
    v[:30, :30] = np.nan
    with pytest.raises(InsufficientValidCells):
        corner_ranges(RangeMap(v))


def test_corner_valid_fraction_threshold():
    v = np.full((40, 40), 2.0)
    patch = np.full(100, np.nan)
    patch[:20] = 1.0
    v[:10, :10] = patch.reshape(10, 10)
    assert corner_ranges(RangeMap(v), CornerRangeSpec(10, 0.2))[0] == 1.0
    patch[19] = np.nan
    v[:10, :10] = patch.reshape(10, 10)
    with pytest.raises(InsufficientValidCells):
        corner_ranges(RangeMap(v), CornerRangeSpec(10, 0.2))
    with pytest.raises(ValueError):
        corner_ranges(RangeMap(v), CornerRangeSpec(41))


def test_corner_pixels_convention():
    c = corner_pixels(Intrinsics(100, 100, 5, 4, 10, 8))
    assert np.array_equal(c, [[0.5, 0.5], [9.5, 0.5], [9.5, 7.5], [0.5, 7.5]])


@pytest.mark.parametrize("a", [0.5, 2.0, 5.5])
def test_flat_nadir_rectangle(a):
    fx, fy = corner_fov(INTR)
    fp = estimate_footprint(view_at([3.0, -4.0, -a]), INTR, NADIR, RangeMap.constant(640, 480, a), FRAME)
    east = 2 * a * np.tan(fx / 2)
    north = 2 * a * np.tan(fy / 2)
    # image top is forward (north), image left is port (west)
    want = np.array(
        [[3 + north / 2, -4 - east / 2, 0], [3 + north / 2, -4 + east / 2, 0],
         [3 - north / 2, -4 + east / 2, 0], [3 - north / 2, -4 - east / 2, 0]]
    )
    assert np.max(np.abs(fp.local - want)) < 1e-12
    ring = flatten(fp, FRAME).ring
    sides = np.linalg.norm(np.diff(np.r_[ring, ring[:1]], axis=0), axis=1)
    assert sorted(sides)[:2] == pytest.approx([north, north], abs=1e-9)
    assert sorted(sides)[2:] == pytest.approx([east, east], abs=1e-9)
    assert np.allclose(fp.camera_center, [3, -4, -a])


def test_camera_rolled_half_turn_gives_same_rectangle():
    rolled = RigidTransform(rotation_about_axis([0, 0, 1], np.pi) @ NADIR.rotation, np.zeros(3))
    rm = RangeMap.constant(640, 480, 2.0)
    a = estimate_footprint(view_at([0, 0, -2]), INTR, NADIR, rm, FRAME)
    b = estimate_footprint(view_at([0, 0, -2]), INTR, rolled, rm, FRAME)
    assert np.max(np.abs(np.roll(a.local, 2, axis=0) - b.local)) < 1e-12


def _ray_plane_oracle(intr, R_c_to_l, C, floor_d):
    # unit corner rays from the camera, cut with the plane D = floor_d
    pts, ranges = [], []
    for u, v in corner_pixels(intr):
        d_cam = np.array([(u - intr.u0) / intr.alpha_x, (v - intr.v0) / intr.alpha_y, 1.0])
        d_cam /= np.linalg.norm(d_cam)
        d = R_c_to_l @ d_cam
        s = (floor_d - C[2]) / d[2]
        pts.append(C + s * d)
        ranges.append(s * d_cam[2])
    return np.array(pts), np.array(ranges)


@pytest.mark.parametrize("axis", [[1, 0, 0], [0, 1, 0], [1, 1, 0]])
def test_tilted_camera_matches_ray_plane_oracle(axis):
    tilt = RigidTransform(rotation_about_axis(axis, np.radians(10)) @ NADIR.rotation, np.zeros(3))
    view = view_at([1.0, 2.0, -2.5], yaw=0.4)
    T_c_to_l = view.local_to_camera(tilt).inverse()
    want, z = _ray_plane_oracle(INTR, T_c_to_l.rotation, T_c_to_l.translation, 0.0)
    v = np.full((480, 640), 3.0)
    p = 30
    v[:p, :p], v[:p, -p:], v[-p:, -p:], v[-p:, :p] = z
    fp = estimate_footprint(view, INTR, tilt, RangeMap(v), FRAME)
    assert np.max(np.abs(fp.local - want)) < 1e-9
    assert np.max(np.abs(fp.local[:, 2])) < 1e-9


def test_estimate_rejects_wrong_map_size():
    with pytest.raises(DimensionMismatch):
        estimate_footprint(view_at([0, 0, -2]), INTR, NADIR, RangeMap.constant(320, 240, 2.0), FRAME)


def test_global_vertices_round_trip():
    fp = estimate_footprint(view_at([10, 20, -2]), INTR, NADIR, RangeMap.constant(640, 480, 2.0), FRAME)
    llh = np.array([[p.latitude, p.longitude, p.height] for p in fp.vertices])
    assert np.max(np.abs(FRAME.geodetic_to_ned(llh) - fp.local)) < 1e-6


def _fp3(local):
    local = np.asarray(local, dtype=float)
    return Footprint3D("x", tuple(GeodeticPoint(*r) for r in FRAME.ned_to_geodetic(local)), local)


def test_flatten_discards_height():
    rect = np.array([[1, 0, 0], [1, 2, 0], [0, 2, 0], [0, 0, 0]], dtype=float)
    llh = FRAME.ned_to_geodetic(rect)
    rings = []
    for h in (-20.0, -27.5):
        pts = np.column_stack([llh[:, :2], np.full(4, h)])
        rings.append(flatten(Footprint3D("x", tuple(GeodeticPoint(*r) for r in pts), FRAME.geodetic_to_ned(pts)), FRAME).ring)
    assert np.max(np.abs(rings[0] - rings[1])) < 1e-9
    # inputs went through degrees, so vertices carry ~1e-9 m quantization
    assert Footprint2D("x", rings[0]).area == pytest.approx(2.0, abs=1e-8)


def test_flatten_global_and_local_routes_agree():
    rect = np.array([[1, 0, 3], [1, 2, 3.1], [0, 2, 2.9], [0, 0, 3]], dtype=float)
    fp = _fp3(rect)
    moved = Footprint3D("x", fp.vertices, fp.local + 1.0)
    assert np.max(np.abs(flatten(fp, FRAME).ring - flatten(moved, FRAME).ring)) < 1e-8


def test_flatten_orientation_and_idempotence():
    cw = np.array([[0, 0, 0], [0, 2, 0], [1, 2, 0], [1, 0, 0]], dtype=float)
    f1 = flatten(_fp3(cw), FRAME)
    assert f1.area > 0
    from benthicvpr.polygon import signed_area

    assert signed_area(f1.ring) > 0
    f2 = flatten(f1)
    assert np.array_equal(f1.ring, f2.ring)


def test_flatten_degenerate():
    line = np.array([[0, 0, 0], [1, 1, 0], [2, 2, 0], [3, 3, 0]], dtype=float)
    with pytest.raises(DegenerateRing):
        flatten(_fp3(line), FRAME)
    bowtie = np.array([[0, 0, 0], [1, 1, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    with pytest.raises(DegenerateRing):
        flatten(_fp3(bowtie), FRAME)


def test_footprint_overlap_helpers():
    a = Footprint2D("a", [[0, 0], [1, 0], [1, 1], [0, 1]])
    b = Footprint2D("b", [[0.5, 0], [1.5, 0], [1.5, 1], [0.5, 1]])
    assert intersection_area(a, b) == pytest.approx(0.5)
    assert iou(a, b) == pytest.approx(1 / 3)
    assert iou(a, a) == 1.0
