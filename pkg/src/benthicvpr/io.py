"""File formats shared by the pipeline stages.

Binary grids are little-endian. JSON floats are written with Python's
shortest round-trip repr, so reading a file back gives the exact values
that were written.
"""

from __future__ import annotations

import json
import logging
import struct
import warnings
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .color import PixelStats
from .errors import DataError, EmptyInput
from .footprint import Footprint2D, Footprint3D, normalize_ring
from .fusion import RangeMap, ScaleOffset
from .geodesy import GeodeticPoint, LocalFrame
from .geometry import CameraView, Intrinsics, RigidTransform, matrix_to_quaternion, quaternion_to_matrix
from .linking import Link, LinkSet, LinkStats, VisitPair
from .retrieval import DescriptorSet, EvalReport

log = logging.getLogger(__name__)

RMP_MAGIC = b"RMP1"
DSC_MAGIC = b"DSC1"
PXS_MAGIC = b"PXS1"


class FormatError(DataError):
    """A file does not follow its declared format."""


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_json(path, obj, indent: Optional[int] = 2) -> None:
    text = json.dumps(obj, indent=indent, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def write_jsonl(path, rows: Iterable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(_dumps(row) + "\n")


def read_jsonl(path) -> list:
    rows = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{n}: invalid JSON ({exc})") from None
    return rows


def _floats(v) -> list[float]:
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


# -- calibration ---------------------------------------------------------

def read_calibration(path) -> dict[str, tuple[Intrinsics, RigidTransform]]:
    """Per-camera intrinsics and vehicle-to-camera extrinsic."""
    raw = read_json(path)
    if not isinstance(raw, dict) or not raw:
        raise FormatError(f"{path}: calibration must be a non-empty object keyed by camera_id")
    out = {}
    for cam, c in raw.items():
        try:
            intr = Intrinsics(float(c["fx"]), float(c["fy"]), float(c["cx"]), float(c["cy"]), int(c["width"]), int(c["height"]))
            ext = RigidTransform.from_quaternion(c["extrinsic"]["q"], c["extrinsic"]["t"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: camera {cam!r} is missing field {exc}") from None
        for key in ("distortion", "dist", "k1", "D"):
            if key in c and np.any(np.asarray(c[key], dtype=float) != 0):
                warnings.warn(
                    f"camera {cam!r}: distortion coefficients ignored; pixels are assumed undistorted",
                    RuntimeWarning,
                    stacklevel=2,
                )
                break
        out[str(cam)] = (intr, ext)
    return out


def write_calibration(path, cameras: Mapping[str, tuple[Intrinsics, RigidTransform]]) -> None:
    obj = {}
    for cam, (intr, ext) in cameras.items():
        obj[cam] = {
            "fx": intr.alpha_x,
            "fy": intr.alpha_y,
            "cx": intr.u0,
            "cy": intr.v0,
            "width": intr.width,
            "height": intr.height,
            "extrinsic": {"q": _floats(ext.as_quaternion()), "t": _floats(ext.translation)},
        }
    write_json(path, obj)


# -- poses ---------------------------------------------------------------

def _site_ref(obj, path) -> LocalFrame:
    try:
        s = obj["site_ref"]
        return LocalFrame(GeodeticPoint(float(s["lat"]), float(s["lon"]), float(s["height"])))
    except (KeyError, TypeError):
        raise FormatError(f"{path}: first line must be a site_ref header {{site_ref: {{lat, lon, height}}}}") from None


def _site_header(frame: LocalFrame) -> dict:
    o = frame.origin
    return {"site_ref": {"lat": o.latitude, "lon": o.longitude, "height": o.height}}


def read_poses(path) -> tuple[LocalFrame, list[CameraView]]:
    """Site frame and views; each line gives ``T(l->v)`` as vehicle position and rotation."""
    rows = read_jsonl(path)
    if not rows:
        raise EmptyInput(f"{path}: pose file is empty")
    frame = _site_ref(rows[0], path)
    views = []
    seen = set()
    for n, r in enumerate(rows[1:], 2):
        try:
            R = quaternion_to_matrix(r["q_l_v"])
            p = np.asarray(r["p_ned"], dtype=float)
            key = (str(r["visit_id"]), str(r["view_id"]))
            view = CameraView(
                view_id=str(r["view_id"]),
                visit_id=str(r["visit_id"]),
                camera_id=str(r["camera_id"]),
                pose_local=RigidTransform(R, -R @ p),
                altitude=r.get("altitude"),
                t_unix=r.get("t_unix"),
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}:{n}: missing or malformed field {exc}") from None
        if key in seen:
            raise FormatError(f"{path}:{n}: duplicate view_id {key[1]!r} in visit {key[0]!r}")
        seen.add(key)
        views.append(view)
    if not views:
        raise EmptyInput(f"{path}: pose file has no views")
    return frame, views


def pose_record(view: CameraView) -> dict:
    R = view.pose_local.rotation
    p = -R.T @ view.pose_local.translation
    rec = {
        "view_id": view.view_id,
        "visit_id": view.visit_id,
        "camera_id": view.camera_id,
        "t_unix": view.t_unix,
        "p_ned": _floats(p),
        "q_l_v": _floats(matrix_to_quaternion(R)),
    }
    if view.altitude is not None:
        rec["altitude"] = float(view.altitude)
    return rec


def write_poses(path, frame: LocalFrame, views: Iterable[CameraView]) -> None:
    write_jsonl(path, [_site_header(frame)] + [pose_record(v) for v in views])


# -- range maps ----------------------------------------------------------

def write_range_map(path, rmap: RangeMap) -> None:
    with open(path, "wb") as f:
        f.write(RMP_MAGIC + struct.pack("<II", rmap.width, rmap.height))
        f.write(np.ascontiguousarray(rmap.values, dtype="<f4").tobytes())


def read_range_map(path) -> RangeMap:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != RMP_MAGIC:
        raise FormatError(f"{path}: not an RMP1 range map")
    w, h = struct.unpack_from("<II", data, 4)
    if len(data) != 12 + 4 * w * h:
        raise FormatError(f"{path}: expected {w}x{h} float32 payload, got {len(data) - 12} bytes")
    vals = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w).astype(float)
    with np.errstate(invalid="ignore"):
        bad = np.isfinite(vals) & (vals <= 0)
    if bad.any():
        raise FormatError(f"{path}: {int(bad.sum())} non-positive range cells")
    return RangeMap(vals)


# -- descriptors ---------------------------------------------------------

def write_descriptors(path, ds: DescriptorSet) -> None:
    with open(path, "wb") as f:
        f.write(DSC_MAGIC + struct.pack("<II", len(ds), ds.dim))
        for vid in ds.view_ids:
            b = vid.encode("utf-8")
            if len(b) > 0xFFFF:
                raise ValueError(f"view id too long: {vid[:20]}...")
            f.write(struct.pack("<H", len(b)) + b)
        f.write(np.ascontiguousarray(ds.data, dtype="<f4").tobytes())


def read_descriptors(path) -> DescriptorSet:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != DSC_MAGIC:
        raise FormatError(f"{path}: not a DSC1 descriptor file")
    count, dim = struct.unpack_from("<II", data, 4)
    off = 12
    ids = []
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, off)
            off += 2
            ids.append(data[off : off + n].decode("utf-8"))
            off += n
    except (struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt view id table ({exc})") from None
    if len(data) - off != 4 * count * dim:
        raise FormatError(f"{path}: expected {count}x{dim} float32 payload, got {len(data) - off} bytes")
    vals = np.frombuffer(data, dtype="<f4", offset=off).reshape(count, dim).astype(float)
    try:
        return DescriptorSet(tuple(ids), vals)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# -- links and reports ---------------------------------------------------

def write_links(path, links: LinkSet) -> None:
    write_jsonl(
        path,
        ({"q": l.query_view_id, "d": l.db_view_id, "iou": l.iou, "dist_m": l.center_distance} for l in links),
    )


def read_links(path, pair: Optional[VisitPair] = None, kind: str = "footprint") -> LinkSet:
    try:
        links = [Link(str(r["q"]), str(r["d"]), float(r["iou"]), float(r["dist_m"])) for r in read_jsonl(path)]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed link record ({exc})") from None
    return LinkSet(links, pair, kind)


def write_eval_report(path, report: EvalReport) -> None:
    write_json(path, report.to_dict())


def write_per_query_csv(path, report: EvalReport) -> None:
    cols = ["query_view_id", "first_hit_rank"] + [f"outcome_at_{k}" for k in report.k_values]
    lines = [",".join(cols)]
    for q in report.query_ids:
        r = report.first_hit_rank.get(q)
        lines.append(",".join([q, "" if r is None else str(r)] + [report.outcome(q, k) for k in report.k_values]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def scale_offset_record(view_id: str, so: ScaleOffset) -> dict:
    return {
        "view_id": view_id,
        "a": so.a,
        "b": so.b,
        "inlier_rmse": so.inlier_rmse,
        "sample_count": so.sample_count,
        "iterations": so.iterations,
    }


# -- footprints ----------------------------------------------------------

def footprint_record(fp: Footprint3D, t_unix: Optional[float] = None) -> dict:
    rec = {
        "view_id": fp.view_id,
        "visit_id": fp.visit_id,
        "t_unix": t_unix,
        "vertices": [[v.latitude, v.longitude, v.height] for v in fp.vertices],
        "local_ned": [_floats(p) for p in fp.local],
    }
    if fp.camera_center is not None:
        rec["camera_center"] = _floats(fp.camera_center)
    return rec


def write_footprints_jsonl(path, frame: LocalFrame, fps: Sequence[Footprint3D], times: Optional[Mapping[str, float]] = None) -> None:
    times = times or {}
    write_jsonl(path, [_site_header(frame)] + [footprint_record(fp, times.get(fp.view_id)) for fp in fps])


def read_footprints_jsonl(path) -> tuple[LocalFrame, list[Footprint3D], dict[str, Optional[float]]]:
    rows = read_jsonl(path)
    if not rows:
        raise EmptyInput(f"{path}: footprint file is empty")
    frame = _site_ref(rows[0], path)
    fps, times = [], {}
    for n, r in enumerate(rows[1:], 2):
        try:
            fps.append(
                Footprint3D(
                    str(r["view_id"]),
                    tuple(GeodeticPoint(*map(float, v)) for v in r["vertices"]),
                    np.asarray(r["local_ned"], dtype=float),
                    camera_center=r.get("camera_center"),
                    visit_id=r.get("visit_id"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{n}: malformed footprint ({exc})") from None
        times[fps[-1].view_id] = r.get("t_unix")
    return frame, fps, times


def _lonlat_ring(fp: Footprint3D) -> list[list[float]]:
    ll = np.array([[v.longitude, v.latitude] for v in fp.vertices])
    x, y = ll[:, 0], ll[:, 1]
    sa = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if sa < 0:
        ll = ll[::-1]
    ring = [[float(a), float(b)] for a, b in ll]
    return ring + [ring[0]]


def footprints_geojson(fps: Sequence[Footprint3D], fps2d: Optional[Mapping[str, Footprint2D]] = None) -> dict:
    """RFC 7946 FeatureCollection; exterior rings counter-clockwise in [lon, lat]."""
    feats = []
    for fp in fps:
        props = {"view_id": fp.view_id, "visit_id": fp.visit_id}
        if fps2d is not None and fp.view_id in fps2d:
            props["area_m2"] = fps2d[fp.view_id].area
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [_lonlat_ring(fp)]},
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": feats}


def write_footprints_geojson(path, fps: Sequence[Footprint3D], fps2d: Optional[Mapping[str, Footprint2D]] = None) -> None:
    write_json(path, footprints_geojson(fps, fps2d), indent=None)


def geojson_rings(path, frame: LocalFrame) -> dict[str, np.ndarray]:
    """Planar (east, north) rings of a footprint GeoJSON, keyed by view id."""
    obj = read_json(path)
    out = {}
    for f in obj.get("features", []):
        coords = np.asarray(f["geometry"]["coordinates"][0], dtype=float)[:-1]
        llh = np.column_stack([coords[:, 1], coords[:, 0], np.full(len(coords), frame.origin.height)])
        ned = frame.geodetic_to_ned(llh)
        out[f["properties"]["view_id"]] = normalize_ring(ned[:, [1, 0]])
    return out


# -- images and color statistics ----------------------------------------

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm", ".tif", ".tiff")


def read_image(path) -> tuple[np.ndarray, int]:
    """Image as floats in [0, 1] and its bit depth (8 or 16)."""
    import cv2

    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"{path}: unreadable image")
    if img.dtype == np.uint8:
        return img.astype(float) / 255.0, 8
    if img.dtype == np.uint16:
        return img.astype(float) / 65535.0, 16
    raise FormatError(f"{path}: unsupported pixel type {img.dtype}")


def write_image(path, img: np.ndarray, depth: int = 8) -> None:
    import cv2

    x = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    if depth == 8:
        out = np.rint(x * 255.0).astype(np.uint8)
    elif depth == 16:
        out = np.rint(x * 65535.0).astype(np.uint16)
    else:
        raise ValueError("depth must be 8 or 16")
    if not cv2.imwrite(str(path), out):
        raise OSError(f"could not write {path}")


def write_pixel_stats(path, stats: PixelStats) -> None:
    h, w, c = stats.mean.shape
    with open(path, "wb") as f:
        f.write(PXS_MAGIC + struct.pack("<IIIQ", w, h, c, stats.count))
        f.write(np.ascontiguousarray(stats.mean, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(stats.std, dtype="<f8").tobytes())


def read_pixel_stats(path) -> PixelStats:
    data = Path(path).read_bytes()
    if data[:4] != PXS_MAGIC:
        raise FormatError(f"{path}: not a PXS1 statistics file")
    w, h, c, n = struct.unpack_from("<IIIQ", data, 4)
    size = w * h * c
    if len(data) != 24 + 16 * size:
        raise FormatError(f"{path}: truncated statistics payload")
    mean = np.frombuffer(data, dtype="<f8", count=size, offset=24).reshape(h, w, c).copy()
    std = np.frombuffer(data, dtype="<f8", count=size, offset=24 + 8 * size).reshape(h, w, c).copy()
    return PixelStats(mean, std, int(n))


def link_stats_record(pair: VisitPair, stats: Optional[LinkStats], query_count: int) -> dict:
    rec = {"query_visit_id": pair.query_visit_id, "database_visit_id": pair.database_visit_id, "query_count": query_count}
    rec.update(stats.to_dict() if stats is not None else {"link_count": 0, "valid_query_count": 0, "alq": None, "distance_p95": None})
    return rec
