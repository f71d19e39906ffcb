"""Image footprints on the seafloor and their pairwise overlap.

A footprint is the quadrilateral where the four image-corner rays meet
the scene, each corner placed at the median range of a small patch in
that corner of the range map. Overlap is measured in the site-local
horizontal plane (east, north in meters), after dropping ellipsoidal
height, so areas come out in square meters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import polygon
from .errors import DegenerateRing, DimensionMismatch, InsufficientValidCells
from .fusion import RangeMap
from .geodesy import GeodeticPoint, LocalFrame
from .geometry import CameraView, Intrinsics, RigidTransform, inverse_project

MIN_RING_AREA = 1e-10
# local and geodetic vertices closer than this describe the same footprint
LOCAL_AGREEMENT = 1e-4

CORNER_NAMES = ("top_left", "top_right", "bottom_right", "bottom_left")


@dataclass(frozen=True)
class CornerRangeSpec:
    patch_size: int = 30
    min_valid_fraction: float = 0.2

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if not (0 < self.min_valid_fraction <= 1):
            raise ValueError("min_valid_fraction must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class Footprint3D:
    view_id: str
    vertices: tuple[GeodeticPoint, ...]
    local: np.ndarray
    camera_center: Optional[np.ndarray] = None
    visit_id: Optional[str] = None

    def __post_init__(self):
        if len(self.vertices) != 4:
            raise ValueError("a footprint has exactly 4 vertices")
        loc = np.array(self.local, dtype=float).reshape(4, 3)
        if not np.all(np.isfinite(loc)):
            raise ValueError("footprint vertices must be finite")
        object.__setattr__(self, "local", loc)
        if self.camera_center is not None:
            object.__setattr__(self, "camera_center", np.array(self.camera_center, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class Footprint2D:
    """Counter-clockwise ring in the site plane; columns are (east, north)."""

    view_id: str
    ring: np.ndarray
    camera_center: Optional[np.ndarray] = None
    visit_id: Optional[str] = None

    def __post_init__(self):
        ring = np.array(self.ring, dtype=float).reshape(-1, 2)
        ring.setflags(write=False)
        object.__setattr__(self, "ring", ring)

    @property
    def area(self) -> float:
        return polygon.area(self.ring)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.ring.min(axis=0)
        hi = self.ring.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def centroid(self) -> np.ndarray:
        return self.ring.mean(axis=0)


def corner_patches(rmap: RangeMap, patch: int) -> list[np.ndarray]:
    v = rmap.values
    h, w = v.shape
    if patch > w or patch > h:
        raise ValueError(f"patch size {patch} does not fit a {w}x{h} map")
    return [
        v[:patch, :patch],
        v[:patch, w - patch :],
        v[h - patch :, w - patch :],
        v[h - patch :, :patch],
    ]


def corner_ranges(rmap: RangeMap, spec: CornerRangeSpec = CornerRangeSpec()) -> np.ndarray:
    """Median valid range of each corner patch, ordered TL, TR, BR, BL."""
    out = np.empty(4)
    for i, p in enumerate(corner_patches(rmap, spec.patch_size)):
        vals = p[np.isfinite(p)]
        if vals.size < spec.min_valid_fraction * p.size or vals.size == 0:
            raise InsufficientValidCells(
                f"{CORNER_NAMES[i]} patch has {vals.size}/{p.size} valid cells"
            )
        out[i] = np.median(vals)
    return out


def corner_pixels(intr: Intrinsics) -> np.ndarray:
    w, h = intr.width, intr.height
    return np.array([[0.5, 0.5], [w - 0.5, 0.5], [w - 0.5, h - 0.5], [0.5, h - 0.5]])


def corner_fov(intr: Intrinsics) -> tuple[float, float]:
    """Angles subtended by the corner-pixel centers along x and y (radians).

    A nadir camera at altitude ``a`` over a flat floor has a footprint of
    exactly ``2 a tan(fov / 2)`` per axis with these angles; the nominal
    edge-to-edge field of view is larger by about one pixel.
    """
    c = corner_pixels(intr)
    fx = np.arctan((intr.u0 - c[0, 0]) / intr.alpha_x) + np.arctan((c[1, 0] - intr.u0) / intr.alpha_x)
    fy = np.arctan((intr.v0 - c[0, 1]) / intr.alpha_y) + np.arctan((c[2, 1] - intr.v0) / intr.alpha_y)
    return float(fx), float(fy)


def estimate_footprint(
    view: CameraView,
    intr: Intrinsics,
    extr: RigidTransform,
    rmap: RangeMap,
    frame: LocalFrame,
    spec: CornerRangeSpec = CornerRangeSpec(),
) -> Footprint3D:
    if (rmap.width, rmap.height) != (intr.width, intr.height):
        raise DimensionMismatch(
            f"range map {rmap.width}x{rmap.height} != image {intr.width}x{intr.height}"
        )
    ranges = corner_ranges(rmap, spec)
    t_c_to_l = view.local_to_camera(extr).inverse()
    local = inverse_project(intr, t_c_to_l, corner_pixels(intr), ranges)
    llh = frame.ned_to_geodetic(local)
    return Footprint3D(
        view_id=view.view_id,
        vertices=tuple(GeodeticPoint(*row) for row in llh),
        local=local,
        camera_center=t_c_to_l.translation.copy(),
        visit_id=view.visit_id,
    )


def normalize_ring(ring) -> np.ndarray:
    """Validate a ring and return it counter-clockwise."""
    r = np.asarray(ring, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(r)):
        raise DegenerateRing("ring has non-finite vertices")
    if not polygon.is_simple(r):
        raise DegenerateRing("ring is self-intersecting")
    sa = polygon.signed_area(r)
    if abs(sa) < MIN_RING_AREA:
        raise DegenerateRing(f"ring area {abs(sa):.3g} m^2 is below {MIN_RING_AREA}")
    return r if sa > 0 else r[::-1].copy()


def flatten(fp, frame: Optional[LocalFrame] = None) -> Footprint2D:
    """2-D site-plane footprint: heights are dropped, then vertices go to (east, north).

    Each vertex slides along its ellipsoid normal to the frame origin's
    height and keeps its (east, north) coordinates. The slide is applied to
    the footprint's exact local coordinates when they agree with its
    geodetic vertices, which avoids the ~1e-9 m quantization of storing
    positions in degrees. Accepts an existing :class:`Footprint2D` too
    (re-validated and returned unchanged up to orientation), so flattening
    is idempotent.
    """
    if isinstance(fp, Footprint2D):
        return Footprint2D(fp.view_id, normalize_ring(fp.ring), fp.camera_center, fp.visit_id)
    if frame is None:
        raise ValueError("a LocalFrame is needed to flatten a 3-D footprint")
    llh = np.array([[v.latitude, v.longitude, v.height] for v in fp.vertices])
    ned = frame.geodetic_to_ned(llh)
    if np.max(np.abs(ned - fp.local)) < LOCAL_AGREEMENT:
        ned = fp.local
    ned = ned - (llh[:, 2:3] - frame.origin.height) * frame.up_ned(llh)
    ring = normalize_ring(ned[:, [1, 0]])
    return Footprint2D(fp.view_id, ring, fp.camera_center, fp.visit_id)


def _ring_of(fp) -> np.ndarray:
    return fp.ring if isinstance(fp, Footprint2D) else np.asarray(fp, dtype=float)


def intersection_area(a, b) -> float:
    return polygon.intersection_area(_ring_of(a), _ring_of(b))


def iou(a, b) -> float:
    return polygon.iou(_ring_of(a), _ring_of(b))
