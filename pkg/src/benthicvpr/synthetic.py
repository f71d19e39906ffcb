"""Synthetic survey scenes with analytically known footprints and links.

Terrain is a height field over the local north/east plane (elevation up,
so the seafloor sits at ``D = -elevation``). Range maps are rendered by
exact ray-terrain intersection; footprints and links computed here never
touch the rendered arrays, so they serve as independent references for
the range-map -> footprint -> link pipeline.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import RayMiss
from .footprint import CornerRangeSpec, Footprint2D, Footprint3D, corner_pixels, flatten
from .fusion import RangeMap
from .geodesy import GeodeticPoint, LocalFrame
from .geometry import CameraView, Intrinsics, RigidTransform, rotation_about_axis
from .linking import LinkSet, VisitPair, build_footprint_links, temporal_pairs
from .retrieval import DescriptorSet

log = logging.getLogger(__name__)

# Downward-looking camera on a SNAME vehicle: image x -> starboard, image y -> aft.
NADIR_EXTRINSIC = RigidTransform(np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), np.zeros(3))

DEFAULT_ORIGIN = GeodeticPoint(-33.84, 151.25, -20.0)


@dataclass(frozen=True, eq=False)
class TerrainModel:
    """Seafloor elevation over ``extent = (n_min, n_max, e_min, e_max)``.

    ``flat``: constant ``z0``. ``step``: ``z_low`` south of ``boundary_x``
    (a north coordinate), ``z_high`` from it northwards. ``boulder``:
    ``z0`` plus seeded value noise in ``[0, relief]`` on a grid of spacing
    ``cell``, bilinearly interpolated (continuous, piecewise smooth).
    """

    kind: str
    extent: tuple[float, float, float, float]
    z0: float = 0.0
    z_low: float = 0.0
    z_high: float = 0.0
    boundary_x: float = 0.0
    relief: float = 0.0
    cell: float = 1.0
    seed: int = 0
    _grid: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("flat", "step", "boulder"):
            raise ValueError(f"unknown terrain kind {self.kind!r}")
        n0, n1, e0, e1 = self.extent
        if not (n0 < n1 and e0 < e1):
            raise ValueError("empty terrain extent")
        if self.kind == "boulder":
            if not (self.relief >= 0 and self.cell > 0):
                raise ValueError("boulder field needs relief >= 0 and cell > 0")
            rng = np.random.default_rng(self.seed)
            nn = int(math.ceil((n1 - n0) / self.cell)) + 2
            ne = int(math.ceil((e1 - e0) / self.cell)) + 2
            object.__setattr__(self, "_grid", rng.uniform(0.0, self.relief, size=(nn, ne)))

    @classmethod
    def flat(cls, z0: float = 0.0, extent=(-50.0, 50.0, -50.0, 50.0)) -> "TerrainModel":
        return cls("flat", tuple(extent), z0=z0)

    @classmethod
    def step(cls, z_low: float, z_high: float, boundary_x: float = 0.0, extent=(-50.0, 50.0, -50.0, 50.0)) -> "TerrainModel":
        return cls("step", tuple(extent), z_low=z_low, z_high=z_high, boundary_x=boundary_x)

    @classmethod
    def boulder_field(cls, relief: float, cell: float = 1.0, seed: int = 0, z0: float = 0.0, extent=(-50.0, 50.0, -50.0, 50.0)) -> "TerrainModel":
        return cls("boulder", tuple(extent), z0=z0, relief=relief, cell=cell, seed=seed)

    @property
    def max_elevation(self) -> float:
        if self.kind == "flat":
            return self.z0
        if self.kind == "step":
            return max(self.z_low, self.z_high)
        return self.z0 + float(self._grid.max())

    @property
    def min_elevation(self) -> float:
        if self.kind == "flat":
            return self.z0
        if self.kind == "step":
            return min(self.z_low, self.z_high)
        return self.z0 + float(self._grid.min())

    def elevation(self, north, east) -> np.ndarray:
        n = np.asarray(north, dtype=float)
        e = np.asarray(east, dtype=float)
        if self.kind == "flat":
            return np.full(np.broadcast(n, e).shape, self.z0)
        if self.kind == "step":
            return np.where(n < self.boundary_x, self.z_low, self.z_high) + 0.0 * e
        gx = (n - self.extent[0]) / self.cell
        gy = (e - self.extent[2]) / self.cell
        g = self._grid
        i = np.clip(np.floor(gx).astype(int), 0, g.shape[0] - 2)
        j = np.clip(np.floor(gy).astype(int), 0, g.shape[1] - 2)
        fx = gx - i
        fy = gy - j
        v = (
            g[i, j] * (1 - fx) * (1 - fy)
            + g[i + 1, j] * fx * (1 - fy)
            + g[i, j + 1] * (1 - fx) * fy
            + g[i + 1, j + 1] * fx * fy
        )
        return self.z0 + v

    def contains(self, north, east) -> np.ndarray:
        n0, n1, e0, e1 = self.extent
        n = np.asarray(north)
        e = np.asarray(east)
        return (n >= n0) & (n <= n1) & (e >= e0) & (e <= e1)

    def intersect(self, origins, dirs, check_extent: bool = True) -> np.ndarray:
        """Ray parameter ``s`` of the first hit of ``origins + s * dirs``."""
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = np.atleast_2d(np.asarray(dirs, dtype=float))
        o, d = np.broadcast_arrays(o, d)
        if self.kind == "flat":
            s = self._plane_hit(o, d, self.z0)
        elif self.kind == "step":
            s = self._step_hit(o, d)
        else:
            s = self._march_hit(o, d)
        if not np.all(np.isfinite(s) & (s > 0)):
            raise RayMiss("ray does not reach the seafloor")
        if check_extent:
            p = o + s[:, None] * d
            if not np.all(self.contains(p[:, 0], p[:, 1])):
                raise RayMiss("ray hits the seafloor outside the terrain extent")
        return s

    @staticmethod
    def _plane_hit(o, d, elevation):
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (-elevation - o[:, 2]) / d[:, 2]
        return np.where(d[:, 2] > 0, s, np.inf)

    def _step_hit(self, o, d):
        bx = self.boundary_x
        low_side = o[:, 0] < bx
        z_here = np.where(low_side, self.z_low, self.z_high)
        z_next = np.where(low_side, self.z_high, self.z_low)
        with np.errstate(divide="ignore", invalid="ignore"):
            s0 = np.where(d[:, 2] > 0, (-z_here - o[:, 2]) / d[:, 2], np.inf)
            s_b = (bx - o[:, 0]) / d[:, 0]
        crosses = np.isfinite(s_b) & (s_b > 0) & (s_b < s0)
        s_b = np.where(crosses, s_b, np.inf)
        d_at_b = o[:, 2] + np.where(crosses, s_b, 0.0) * d[:, 2]
        wall = crosses & (d_at_b >= -z_next)
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = np.where(d[:, 2] > 0, (-z_next - o[:, 2]) / d[:, 2], np.inf)
        return np.where(~crosses, s0, np.where(wall, s_b, s1))

    def _march_hit(self, o, d, step: Optional[float] = None, refine: int = 60):
        # f(s) < 0 above the seafloor, >= 0 at or below it
        def f(s, m):
            p = o[m] + s[:, None] * d[m]
            return p[:, 2] + self.elevation(p[:, 0], p[:, 1])

        with np.errstate(divide="ignore", invalid="ignore"):
            s_top = np.where(d[:, 2] > 0, (-self.max_elevation - o[:, 2]) / d[:, 2], np.inf)
            s_bot = np.where(d[:, 2] > 0, (-self.min_elevation - o[:, 2]) / d[:, 2], np.inf)
        s_top = np.maximum(s_top, 0.0)
        if step is None:
            step = self.cell / 16.0
        horiz = np.maximum(np.hypot(d[:, 0], d[:, 1]), 1e-12)
        ds = np.minimum(step / horiz, np.maximum((s_bot - s_top) / 4.0, 1e-6))
        lo = s_top.copy()
        hi = np.full_like(lo, np.inf)
        active = np.isfinite(s_top)
        while active.any():
            nxt = np.minimum(lo + ds, s_bot)
            below = np.zeros_like(active)
            below[active] = f(nxt[active], active) >= 0
            hi[below] = nxt[below]
            advance = active & ~below
            lo[advance] = nxt[advance]
            active = advance & (lo < s_bot)
        ok = np.isfinite(hi)
        for _ in range(refine):
            mid = 0.5 * (lo + hi)
            fm = np.zeros_like(mid)
            fm[ok] = f(mid[ok], ok)
            hi = np.where(ok & (fm >= 0), mid, hi)
            lo = np.where(ok & (fm < 0), mid, lo)
        return hi


@dataclass(frozen=True)
class SurveyPlan:
    """Lawnmower survey over ``region = (n_min, n_max, e_min, e_max)``.

    Lines run along ``heading`` (radians from north) and alternate in
    direction. ``altitude_mode="hold"`` keeps ``altitude`` above the
    terrain directly below; ``"depth"`` flies at constant depth with
    ``altitude`` clearance over the highest terrain in the region.
    """

    line_spacing: float
    image_spacing: float
    altitude: float
    region: tuple[float, float, float, float]
    heading: float = 0.0
    altitude_mode: str = "hold"
    position_noise: float = 0.0
    yaw_noise: float = 0.0
    attitude_noise: float = 0.0
    seed: int = 0
    t_start: float = 0.0
    frame_interval: float = 1.0

    def __post_init__(self):
        if not (self.line_spacing > 0 and self.image_spacing > 0):
            raise ValueError("line and image spacings must be positive")
        if not self.altitude > 0:
            raise ValueError("altitude must be positive")
        if self.altitude_mode not in ("hold", "depth"):
            raise ValueError(f"unknown altitude mode {self.altitude_mode!r}")


def lawnmower_positions(plan: SurveyPlan) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal (north, east) positions and yaw angles along the survey."""
    n0, n1, e0, e1 = plan.region
    cn, ce = 0.5 * (n0 + n1), 0.5 * (e0 + e1)
    h = plan.heading
    along = np.array([math.cos(h), math.sin(h)])
    across = np.array([-math.sin(h), math.cos(h)])
    corners = np.array([[n0, e0], [n0, e1], [n1, e0], [n1, e1]]) - [cn, ce]
    a_ext = np.abs(corners @ along).max()
    c_ext = np.abs(corners @ across).max()
    n_lines = int(math.floor(2 * c_ext / plan.line_spacing + 1e-9)) + 1
    n_imgs = int(math.floor(2 * a_ext / plan.image_spacing + 1e-9)) + 1
    c_off = -0.5 * (n_lines - 1) * plan.line_spacing
    a_off = -0.5 * (n_imgs - 1) * plan.image_spacing
    pos, yaw = [], []
    for li in range(n_lines):
        c = c_off + li * plan.line_spacing
        idx = range(n_imgs) if li % 2 == 0 else range(n_imgs - 1, -1, -1)
        for k in idx:
            a = a_off + k * plan.image_spacing
            p = np.array([cn, ce]) + a * along + c * across
            if n0 - 1e-9 <= p[0] <= n1 + 1e-9 and e0 - 1e-9 <= p[1] <= e1 + 1e-9:
                pos.append(p)
                yaw.append(h if li % 2 == 0 else h + math.pi)
    return np.array(pos).reshape(-1, 2), np.array(yaw)


def vehicle_pose(position_ned, yaw: float, pitch: float = 0.0, roll: float = 0.0) -> RigidTransform:
    """``T(l->v)`` for a vehicle at ``position_ned`` with Z-Y-X Euler attitude."""
    R_v_to_l = (
        rotation_about_axis([0, 0, 1], yaw)
        @ rotation_about_axis([0, 1, 0], pitch)
        @ rotation_about_axis([1, 0, 0], roll)
    )
    R = R_v_to_l.T
    return RigidTransform(R, -R @ np.asarray(position_ned, dtype=float))


def pixel_rays(intr: Intrinsics, pixels) -> np.ndarray:
    """Camera-frame ray directions scaled to unit optical-axis component."""
    px = np.asarray(pixels, dtype=float).reshape(-1, 2)
    return np.column_stack(
        [(px[:, 0] - intr.u0) / intr.alpha_x, (px[:, 1] - intr.v0) / intr.alpha_y, np.ones(len(px))]
    )


def pixel_ranges(terrain: TerrainModel, view: CameraView, intr: Intrinsics, extr: RigidTransform, pixels) -> np.ndarray:
    """Exact ranges along the optical axis for the given pixel coordinates."""
    t_c_to_l = view.local_to_camera(extr).inverse()
    rays = pixel_rays(intr, pixels) @ t_c_to_l.rotation.T
    return terrain.intersect(np.broadcast_to(t_c_to_l.translation, rays.shape), rays)


def render_range_map(terrain: TerrainModel, view: CameraView, intr: Intrinsics, extr: RigidTransform) -> RangeMap:
    uu, vv = np.meshgrid(np.arange(intr.width) + 0.5, np.arange(intr.height) + 0.5)
    px = np.column_stack([uu.ravel(), vv.ravel()])
    z = pixel_ranges(terrain, view, intr, extr, px)
    return RangeMap(z.reshape(intr.height, intr.width))


def _footprint_from_ranges(view, intr, extr, frame, ranges) -> Footprint3D:
    t_c_to_l = view.local_to_camera(extr).inverse()
    rays = pixel_rays(intr, corner_pixels(intr))
    local = t_c_to_l.apply(rays * np.asarray(ranges)[:, None])
    llh = frame.ned_to_geodetic(local)
    return Footprint3D(
        view.view_id,
        tuple(GeodeticPoint(*r) for r in llh),
        local,
        camera_center=t_c_to_l.translation.copy(),
        visit_id=view.visit_id,
    )


def corner_ray_footprint(terrain, view, intr, extr, frame) -> Footprint3D:
    """Footprint from the exact intersection of the four corner rays."""
    ranges = pixel_ranges(terrain, view, intr, extr, corner_pixels(intr))
    return _footprint_from_ranges(view, intr, extr, frame, ranges)


def analytic_footprint(terrain, view, intr, extr, frame, spec: CornerRangeSpec = CornerRangeSpec()) -> Footprint3D:
    """Footprint with each corner at the exact median range of its corner patch."""
    p, w, h = spec.patch_size, intr.width, intr.height
    offs = np.arange(p) + 0.5
    starts = [(0, 0), (w - p, 0), (w - p, h - p), (0, h - p)]
    ranges = []
    for u0, v0 in starts:
        uu, vv = np.meshgrid(u0 + offs, v0 + offs)
        z = pixel_ranges(terrain, view, intr, extr, np.column_stack([uu.ravel(), vv.ravel()]))
        ranges.append(float(np.median(z)))
    return _footprint_from_ranges(view, intr, extr, frame, ranges)


@dataclass
class SyntheticScene:
    terrain: TerrainModel
    frame: LocalFrame
    intrinsics: Intrinsics
    extrinsic: RigidTransform
    camera_id: str
    views: list[CameraView]
    range_maps: dict[str, RangeMap]
    footprints: dict[str, Footprint3D]
    footprints_2d: dict[str, Footprint2D]
    visit_times: dict[str, float]
    pairs: list[VisitPair]
    links: dict[str, LinkSet]
    tau_f: float
    spec: CornerRangeSpec

    def views_of(self, visit_id: str) -> list[CameraView]:
        return [v for v in self.views if v.visit_id == visit_id]

    def centers(self, visit_id: Optional[str] = None) -> dict[str, np.ndarray]:
        return {
            v.view_id: v.camera_center(self.extrinsic)
            for v in self.views
            if visit_id is None or v.visit_id == visit_id
        }

    def fps_of(self, visit_id: str) -> list[Footprint2D]:
        return [self.footprints_2d[v.view_id] for v in self.views_of(visit_id)]


def plan_views(terrain: TerrainModel, visit_id: str, plan: SurveyPlan, camera_id: str = "cam0") -> list[CameraView]:
    pos, yaw = lawnmower_positions(plan)
    rng = np.random.default_rng(plan.seed)
    if plan.position_noise > 0:
        pos = pos + rng.normal(0.0, plan.position_noise, pos.shape)
    if plan.yaw_noise > 0:
        yaw = yaw + rng.normal(0.0, plan.yaw_noise, yaw.shape)
    tilt = np.zeros((len(pos), 2))
    if plan.attitude_noise > 0:
        tilt = rng.normal(0.0, plan.attitude_noise, tilt.shape)
    if plan.altitude_mode == "depth":
        n0, n1, e0, e1 = plan.region
        nn, ee = np.meshgrid(np.linspace(n0, n1, 41), np.linspace(e0, e1, 41))
        top = float(terrain.elevation(nn, ee).max())
        depth = np.full(len(pos), -top - plan.altitude)
    else:
        depth = -terrain.elevation(pos[:, 0], pos[:, 1]) - plan.altitude
    views = []
    for k, ((n, e), d, y, (pitch, roll)) in enumerate(zip(pos, depth, yaw, tilt)):
        altitude = float(-terrain.elevation(n, e) - d)
        views.append(
            CameraView(
                view_id=f"{visit_id}_{k:05d}",
                visit_id=visit_id,
                camera_id=camera_id,
                pose_local=vehicle_pose([n, e, d], y, pitch, roll),
                altitude=altitude,
                t_unix=plan.t_start + k * plan.frame_interval,
            )
        )
    return views


def assemble_scene(
    terrain: TerrainModel,
    views: Sequence[CameraView],
    intr: Intrinsics,
    *,
    extrinsic: RigidTransform = NADIR_EXTRINSIC,
    frame: Optional[LocalFrame] = None,
    spec: CornerRangeSpec = CornerRangeSpec(),
    tau_f: float = 0.07,
    visit_times: Optional[Mapping[str, float]] = None,
    render: bool = True,
) -> SyntheticScene:
    frame = frame or LocalFrame(DEFAULT_ORIGIN)
    views = list(views)
    camera_id = views[0].camera_id if views else "cam0"
    if visit_times is None:
        visit_times = {}
        for v in views:
            t = v.t_unix if v.t_unix is not None else 0.0
            visit_times[v.visit_id] = min(visit_times.get(v.visit_id, t), t)
    range_maps = {v.view_id: render_range_map(terrain, v, intr, extrinsic) for v in views} if render else {}
    fps = {v.view_id: analytic_footprint(terrain, v, intr, extrinsic, frame, spec) for v in views}
    fps2 = {k: flatten(fp, frame) for k, fp in fps.items()}
    pairs = temporal_pairs(dict(visit_times))
    links = {}
    for pair in pairs:
        q = [fps2[v.view_id] for v in views if v.visit_id == pair.query_visit_id]
        d = [fps2[v.view_id] for v in views if v.visit_id == pair.database_visit_id]
        links[pair.name] = build_footprint_links(pair, q, d, tau_f, use_grid=False)
    return SyntheticScene(
        terrain, frame, intr, extrinsic, camera_id, views, range_maps, fps, fps2,
        dict(visit_times), pairs, links, tau_f, spec,
    )


def generate_scene(
    terrain: TerrainModel,
    plans: Mapping[str, SurveyPlan],
    intr: Intrinsics,
    **kwargs,
) -> SyntheticScene:
    """Views, rendered range maps, analytic footprints and analytic links.

    Visits are ordered in time by their plan's ``t_start``.
    """
    views: list[CameraView] = []
    for visit_id, plan in plans.items():
        views.extend(plan_views(terrain, visit_id, plan, kwargs.get("camera_id", "cam0")))
    kwargs.pop("camera_id", None)
    times = {vid: p.t_start for vid, p in plans.items()}
    return assemble_scene(terrain, views, intr, visit_times=times, **kwargs)


FIG_INTRINSICS = Intrinsics.from_fov(640, 480, math.radians(45.0), math.radians(34.0))


def relief_fixture(**kwargs) -> SyntheticScene:
    """Two cameras 1 m apart straddling a 1.5 m step, 1 m above the high side.

    Both fly at the same depth; the camera over the low side looks into
    the step wall, so the footprints do not overlap.
    """
    terrain = TerrainModel.step(z_low=-1.5, z_high=0.0, boundary_x=0.0, extent=(-10, 10, -10, 10))
    views = [
        CameraView("A_0", "A", "cam0", vehicle_pose([0.5, 0.0, -1.0], 0.0), altitude=1.0, t_unix=0.0),
        CameraView("B_0", "B", "cam0", vehicle_pose([-0.5, 0.0, -1.0], 0.0), altitude=2.5, t_unix=1.0),
    ]
    return assemble_scene(terrain, views, FIG_INTRINSICS, **kwargs)


def altitude_fixture(**kwargs) -> SyntheticScene:
    """Two cameras 2.5 m apart across-track at 2 m and 5 m altitude over a flat floor."""
    terrain = TerrainModel.flat(0.0, extent=(-10, 10, -10, 10))
    views = [
        CameraView("A_0", "A", "cam0", vehicle_pose([0.0, 0.0, -2.0], 0.0), altitude=2.0, t_unix=0.0),
        CameraView("B_0", "B", "cam0", vehicle_pose([0.0, 2.5, -5.0], 0.0), altitude=5.0, t_unix=1.0),
    ]
    return assemble_scene(terrain, views, FIG_INTRINSICS, **kwargs)


@dataclass(frozen=True)
class HitModel:
    """How planted retrievals behave.

    A seeded ``hit_fraction`` of the valid queries gets its best linked
    view at rank ``hit_rank`` (or ``hit_ranks[query]``); every other
    planted rank, up to ``depth``, holds an unlinked view chosen by
    ``distractors`` ("random", or "nearest" by camera center).
    """

    hit_fraction: float = 1.0
    hit_rank: int = 1
    depth: int = 25
    distractors: str = "random"
    hit_ranks: Optional[Mapping[str, int]] = None

    def __post_init__(self):
        if not (0 <= self.hit_fraction <= 1):
            raise ValueError("hit_fraction must lie in [0, 1]")
        if self.hit_rank < 1 or self.depth < 1:
            raise ValueError("hit_rank and depth must be >= 1")
        if self.distractors not in ("random", "nearest"):
            raise ValueError(f"unknown distractor policy {self.distractors!r}")


@dataclass
class PlantedDescriptors:
    queries: DescriptorSet
    database: DescriptorSet
    rankings: dict[str, list[str]]
    hit_queries: set[str]


def generate_descriptors(
    query_ids: Sequence[str],
    db_ids: Sequence[str],
    links: LinkSet,
    model: HitModel = HitModel(),
    dim: int = 64,
    seed: int = 0,
    centers: Optional[Mapping[str, Sequence[float]]] = None,
) -> PlantedDescriptors:
    """Descriptors whose exact top-``depth`` ranking per query is planted.

    Database descriptors are orthonormal rows of a seeded random rotation;
    a query is a weighted sum of its planted views with weights strictly
    decreasing by rank, so squared distances order exactly as planted.
    Needs ``dim >= len(db_ids)``; a smaller ``dim`` is raised to that.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    q_ids, d_ids = list(query_ids), list(db_ids)
    n_db = len(d_ids)
    if dim < n_db:
        warnings.warn(f"dim raised from {dim} to {n_db} to plant exact rankings", RuntimeWarning, stacklevel=2)
        dim = n_db
    if model.distractors == "nearest" and centers is None:
        raise ValueError("nearest distractors need camera centers")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    db_desc = basis[:n_db]

    link_map: dict[str, dict[str, float]] = {}
    for l in links:
        link_map.setdefault(l.query_view_id, {})[l.db_view_id] = l.iou
    valid = [q for q in q_ids if q in link_map]
    order = rng.permutation(len(valid))
    n_hit = int(round(model.hit_fraction * len(valid)))
    hit_set = {valid[i] for i in sorted(order[:n_hit])}

    depth = min(model.depth, n_db)
    weights = (depth + 1 - np.arange(1, depth + 1)) / (depth + 1)
    d_index = {d: j for j, d in enumerate(d_ids)}
    q_desc = np.zeros((len(q_ids), dim))
    rankings: dict[str, list[str]] = {}
    for qi, q in enumerate(q_ids):
        linked = link_map.get(q, {})
        others = [d for d in d_ids if d not in linked]
        if model.distractors == "nearest":
            cq = np.asarray(centers[q], dtype=float)
            others.sort(key=lambda d: (float(np.linalg.norm(np.asarray(centers[d], dtype=float) - cq)), d))
        else:
            others = [others[i] for i in rng.permutation(len(others))]
        if q in hit_set:
            best = sorted(linked.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
            r = (model.hit_ranks or {}).get(q, model.hit_rank)
            r = min(max(1, int(r)), depth)
            ranking = others[: depth - 1]
            ranking.insert(min(r - 1, len(ranking)), best)
        else:
            ranking = others[:depth]
        rankings[q] = ranking
        for w, d in zip(weights, ranking):
            q_desc[qi] += w * db_desc[d_index[d]]
    return PlantedDescriptors(
        DescriptorSet(tuple(q_ids), q_desc),
        DescriptorSet(tuple(d_ids), db_desc),
        rankings,
        hit_set,
    )


def synthesize_range_inputs(
    true_map: RangeMap,
    a: float = 2.0,
    b: float = 0.5,
    *,
    noise: float = 0.005,
    outlier_fraction: float = 0.05,
    outlier_offset: float = 1.0,
    hole_fraction: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> tuple[RangeMap, RangeMap]:
    """Stereo-like metric map and a relative map with ``true = a * rel + b``.

    The stereo map gets Gaussian noise, gross outliers, and invalid holes
    along its left border (limited left-right overlap).
    """
    rng = rng or np.random.default_rng(0)
    z = true_map.values
    rel = (z - b) / a
    with np.errstate(invalid="ignore"):
        rel[rel <= 0] = np.nan
    stereo = z + rng.normal(0.0, noise, z.shape)
    out = rng.random(z.shape) < outlier_fraction
    stereo[out] += outlier_offset
    holes = int(round(hole_fraction * z.shape[1]))
    if holes:
        stereo[:, :holes] = np.nan
    with np.errstate(invalid="ignore"):
        stereo[stereo <= 0] = np.nan
    return RangeMap(stereo), RangeMap(rel)
