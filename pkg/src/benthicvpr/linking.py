"""Ground-truth links between a query visit and an earlier database visit.

Footprint links join views whose 2-D footprints overlap with IoU above a
conservative threshold; location links join views whose camera centers
lie closer than a distance threshold. The two are compared to show how a
pure distance criterion changes the ground truth.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from . import polygon
from .errors import EmptyLinkSet, InvalidModel
from .footprint import Footprint2D
from .geometry import percentile


@dataclass(frozen=True)
class VisitPair:
    query_visit_id: str
    database_visit_id: str
    query_time: Optional[float] = None
    database_time: Optional[float] = None

    def __post_init__(self):
        if self.query_visit_id == self.database_visit_id:
            raise ValueError("query and database visit must differ")
        if self.query_time is not None and self.database_time is not None:
            if not self.database_time < self.query_time:
                raise ValueError("database visit must be strictly earlier than the query visit")

    @property
    def name(self) -> str:
        return f"{self.query_visit_id}__{self.database_visit_id}"


def temporal_pairs(visit_times: Mapping[str, float]) -> list[VisitPair]:
    """Every (later, earlier) visit combination, later visit as query."""
    order = sorted(visit_times, key=lambda v: (visit_times[v], v))
    pairs = []
    for i, q in enumerate(order):
        for d in order[:i]:
            if visit_times[d] < visit_times[q]:
                pairs.append(VisitPair(q, d, visit_times[q], visit_times[d]))
    return pairs


@dataclass(frozen=True)
class Link:
    query_view_id: str
    db_view_id: str
    iou: float
    center_distance: float


@dataclass
class LinkSet:
    links: list[Link] = field(default_factory=list)
    pair: Optional[VisitPair] = None
    kind: str = "footprint"
    threshold: Optional[float] = None

    def __len__(self) -> int:
        return len(self.links)

    def __iter__(self) -> Iterator[Link]:
        return iter(self.links)

    def __contains__(self, qd) -> bool:
        return tuple(qd) in self.pairs()

    def pairs(self) -> set[tuple[str, str]]:
        return {(l.query_view_id, l.db_view_id) for l in self.links}

    def by_query(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = defaultdict(set)
        for l in self.links:
            out[l.query_view_id].add(l.db_view_id)
        return dict(out)

    def queries(self) -> set[str]:
        return {l.query_view_id for l in self.links}

    def distances(self) -> np.ndarray:
        return np.array([l.center_distance for l in self.links], dtype=float)


@dataclass(frozen=True)
class ThresholdModel:
    """Flat-floor, nadir, equal-altitude scenario shifted by a registration error.

    ``fov`` is the field of view (radians) along the footprint's shorter side.
    """

    fov: float
    altitude: float
    translation_error: float

    def __post_init__(self):
        if not (0 < self.fov < math.pi):
            raise InvalidModel("fov must lie in (0, pi)")
        if not self.altitude > 0:
            raise InvalidModel("altitude must be positive")
        side = 2 * self.altitude * math.tan(0.5 * self.fov)
        if not (0 <= self.translation_error < side):
            raise InvalidModel(
                f"translation error must lie in [0, {side:.4g}) (the short footprint side)"
            )

    @property
    def short_side(self) -> float:
        return 2 * self.altitude * math.tan(0.5 * self.fov)


def conservative_iou_threshold(m: ThresholdModel) -> float:
    """IoU of two abutting footprints pushed into overlap by the registration error."""
    return m.translation_error / (4 * m.altitude * math.tan(0.5 * m.fov) - m.translation_error)


def center_distance(c1, c2, mode: str = "3d") -> float:
    d = np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)
    if mode == "2d":
        d = d[:2]
    elif mode != "3d":
        raise ValueError(f"unknown distance mode {mode!r}")
    return float(np.linalg.norm(d))


def _fp_distance(q: Footprint2D, d: Footprint2D, mode: str) -> float:
    if q.camera_center is not None and d.camera_center is not None:
        return center_distance(q.camera_center, d.camera_center, mode)
    # no camera centers recorded: fall back to footprint centroids
    return float(np.linalg.norm(q.centroid - d.centroid))


class GridIndex:
    """Uniform grid over axis-aligned boxes ``(xmin, ymin, xmax, ymax)``."""

    def __init__(self, boxes: np.ndarray, cell_size: float):
        if not cell_size > 0:
            raise ValueError("cell size must be positive")
        self.boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
        self.cell = float(cell_size)
        self.origin = self.boxes[:, :2].min(axis=0) if len(self.boxes) else np.zeros(2)
        self.cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, b in enumerate(self.boxes):
            x0, y0, x1, y1 = self._cell_range(b)
            for ix in range(x0, x1 + 1):
                for iy in range(y0, y1 + 1):
                    self.cells[(ix, iy)].append(i)

    def _cell_range(self, box):
        lo = np.floor((np.asarray(box[:2]) - self.origin) / self.cell).astype(int)
        hi = np.floor((np.asarray(box[2:]) - self.origin) / self.cell).astype(int)
        return lo[0], lo[1], hi[0], hi[1]

    def query(self, box) -> np.ndarray:
        """Indices of boxes overlapping ``box`` (touching counts), ascending."""
        x0, y0, x1, y1 = self._cell_range(box)
        found: set[int] = set()
        for ix in range(x0, x1 + 1):
            for iy in range(y0, y1 + 1):
                found.update(self.cells.get((ix, iy), ()))
        if not found:
            return np.empty(0, dtype=np.int64)
        idx = np.fromiter(sorted(found), dtype=np.int64)
        b = self.boxes[idx]
        keep = (b[:, 0] <= box[2]) & (box[0] <= b[:, 2]) & (b[:, 1] <= box[3]) & (box[1] <= b[:, 3])
        return idx[keep]


def _stack_rings(fps: Sequence[Footprint2D]) -> np.ndarray:
    return np.stack([fp.ring for fp in fps]) if fps else np.empty((0, 4, 2))


def _iou_for(q_fps, d_fps, qi, di) -> np.ndarray:
    if len(qi) == 0:
        return np.empty(0)
    shapes = {fp.ring.shape for fp in q_fps} | {fp.ring.shape for fp in d_fps}
    if len(shapes) == 1:
        return polygon.iou_pairs(_stack_rings(q_fps), _stack_rings(d_fps), qi, di)
    return np.array([polygon.iou(q_fps[i].ring, d_fps[j].ring) for i, j in zip(qi, di)])


def candidate_pairs(query_fps, db_fps, use_grid: bool = True, cell_size: Optional[float] = None):
    """Index arrays ``(qi, di)`` of pairs that may overlap."""
    nq, nd = len(query_fps), len(db_fps)
    if nq == 0 or nd == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    if not use_grid:
        qi, di = np.meshgrid(np.arange(nq), np.arange(nd), indexing="ij")
        return qi.ravel(), di.ravel()
    q_boxes = np.array([fp.bounds for fp in query_fps])
    d_boxes = np.array([fp.bounds for fp in db_fps])
    if cell_size is None:
        all_boxes = np.vstack([q_boxes, d_boxes])
        cell_size = float(np.max(np.hypot(all_boxes[:, 2] - all_boxes[:, 0], all_boxes[:, 3] - all_boxes[:, 1])))
    grid = GridIndex(d_boxes, cell_size)
    qi_parts, di_parts = [], []
    for i, box in enumerate(q_boxes):
        hits = grid.query(box)
        if len(hits):
            qi_parts.append(np.full(len(hits), i, dtype=np.int64))
            di_parts.append(hits)
    if not qi_parts:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(qi_parts), np.concatenate(di_parts)


def build_footprint_links(
    pair: Optional[VisitPair],
    query_fps: Sequence[Footprint2D],
    db_fps: Sequence[Footprint2D],
    tau_f: float,
    *,
    use_grid: bool = True,
    cell_size: Optional[float] = None,
    distance_mode: str = "3d",
) -> LinkSet:
    """All (query, database) views whose footprint IoU is strictly above ``tau_f``."""
    if not tau_f >= 0:
        raise ValueError("tau_f must be non-negative")
    query_fps, db_fps = list(query_fps), list(db_fps)
    qi, di = candidate_pairs(query_fps, db_fps, use_grid, cell_size)
    ious = _iou_for(query_fps, db_fps, qi, di)
    keep = ious > tau_f
    links = [
        Link(
            query_fps[i].view_id,
            db_fps[j].view_id,
            float(v),
            _fp_distance(query_fps[i], db_fps[j], distance_mode),
        )
        for i, j, v in zip(qi[keep], di[keep], ious[keep])
    ]
    return LinkSet(links, pair, "footprint", tau_f)


def build_location_links(
    pair: Optional[VisitPair],
    query_centers: Mapping[str, Sequence[float]],
    db_centers: Mapping[str, Sequence[float]],
    tau_d: float,
    *,
    query_fps: Optional[Mapping[str, Footprint2D]] = None,
    db_fps: Optional[Mapping[str, Footprint2D]] = None,
    distance_mode: str = "3d",
) -> LinkSet:
    """All (query, database) views whose camera centers are closer than ``tau_d``.

    ``iou`` is filled in when footprints for both views are supplied, else 0.
    """
    q_ids, d_ids = list(query_centers), list(db_centers)
    links: list[Link] = []
    if q_ids and d_ids:
        cq = np.array([query_centers[k] for k in q_ids], dtype=float).reshape(-1, 3)
        cd = np.array([db_centers[k] for k in d_ids], dtype=float).reshape(-1, 3)
        if distance_mode == "2d":
            cq, cd = cq[:, :2], cd[:, :2]
        elif distance_mode != "3d":
            raise ValueError(f"unknown distance mode {distance_mode!r}")
        qi_parts, di_parts, dist_parts = [], [], []
        for i in range(len(cq)):
            d = np.sqrt(((cd - cq[i]) ** 2).sum(axis=1))
            hit = np.flatnonzero(d < tau_d)
            qi_parts.append(np.full(len(hit), i, dtype=np.int64))
            di_parts.append(hit)
            dist_parts.append(d[hit])
        qi = np.concatenate(qi_parts)
        di = np.concatenate(di_parts)
        dist = np.concatenate(dist_parts)
        ious = np.zeros(len(qi))
        if query_fps is not None and db_fps is not None and len(qi):
            have = np.array([q_ids[i] in query_fps and d_ids[j] in db_fps for i, j in zip(qi, di)], dtype=bool)
            if have.any():
                q_list = [query_fps[q_ids[i]] for i in qi[have]]
                d_list = [db_fps[d_ids[j]] for j in di[have]]
                n = len(q_list)
                ious[have] = _iou_for(q_list, d_list, np.arange(n), np.arange(n))
        links = [
            Link(q_ids[i], d_ids[j], float(v), float(s)) for i, j, v, s in zip(qi, di, ious, dist)
        ]
    return LinkSet(links, pair, "location", tau_d)


def distance_threshold_p95(links: Iterable[Link]) -> float:
    """95th percentile (linear interpolation) of linked camera-center distances."""
    d = np.array([l.center_distance for l in links], dtype=float)
    if d.size == 0:
        raise EmptyLinkSet("no links to take a percentile over")
    return percentile(d, 95)


@dataclass(frozen=True)
class LinkStats:
    link_count: int
    valid_query_count: int
    alq: float
    distance_p95: float

    def to_dict(self) -> dict:
        return {
            "link_count": self.link_count,
            "valid_query_count": self.valid_query_count,
            "alq": self.alq,
            "distance_p95": self.distance_p95,
        }


def link_stats(links: LinkSet, valid_query_count: Optional[int] = None) -> LinkStats:
    """Link count, average links per valid query, and p95 center distance.

    By default the valid queries are the queries holding at least one link.
    """
    if len(links) == 0:
        raise EmptyLinkSet("link set is empty")
    n_valid = len(links.queries()) if valid_query_count is None else int(valid_query_count)
    if n_valid <= 0:
        raise ValueError("valid_query_count must be positive")
    return LinkStats(len(links), n_valid, len(links) / n_valid, distance_threshold_p95(links))
