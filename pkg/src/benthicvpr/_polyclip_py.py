"""Pure-Python polygon intersection kernel (fallback for ``_polyclip``).

Simple polygons are intersected by decomposing each into convex pieces
with a sign: a convex ring is one positive piece, anything else becomes
the fan of triangles from vertex 0, each signed by its orientation. The
signed fan reproduces the polygon's winding number, so summing
``s_i * s_j * area(piece_i & piece_j)`` gives the exact intersection area.
Convex pieces are clipped with Sutherland-Hodgman.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _as_pts(ring):
    return [(float(x), float(y)) for x, y in np.asarray(ring, dtype=float).reshape(-1, 2)]


def signed_area(pts) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _is_convex_ccw(pts) -> bool:
    n = len(pts)
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        cx, cy = pts[(i + 2) % n]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) < 0:
            return False
    return True


def _pieces(pts):
    if _is_convex_ccw(pts):
        return [(1.0, pts)]
    out = []
    p0 = pts[0]
    for i in range(1, len(pts) - 1):
        tri = [p0, pts[i], pts[i + 1]]
        sa = signed_area(tri)
        if sa > 0:
            out.append((1.0, tri))
        elif sa < 0:
            out.append((-1.0, tri[::-1]))
    return out


def convex_clip_area(subject, clip) -> float:
    """Area of two counter-clockwise convex polygons' intersection."""
    output = list(subject)
    nc = len(clip)
    for i in range(nc):
        if not output:
            return 0.0
        c1x, c1y = clip[i]
        c2x, c2y = clip[(i + 1) % nc]
        ex_, ey_ = c2x - c1x, c2y - c1y
        inp = output
        output = []
        sx, sy = inp[-1]
        ds = ex_ * (sy - c1y) - ey_ * (sx - c1x)
        for px, py in inp:
            dp = ex_ * (py - c1y) - ey_ * (px - c1x)
            if dp >= 0:
                if ds < 0:
                    t = ds / (ds - dp)
                    output.append((sx + t * (px - sx), sy + t * (py - sy)))
                output.append((px, py))
            elif ds >= 0:
                t = ds / (ds - dp)
                output.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy, ds = px, py, dp
    if len(output) < 3:
        return 0.0
    return max(signed_area(output), 0.0)


def _prepare(a, b):
    pa, pb = _as_pts(a), _as_pts(b)
    # canonical argument order makes the result exactly symmetric
    if pb < pa:
        pa, pb = pb, pa
    ox, oy = pa[0]
    pa = [(x - ox, y - oy) for x, y in pa]
    pb = [(x - ox, y - oy) for x, y in pb]
    if signed_area(pa) < 0:
        pa = pa[::-1]
    if signed_area(pb) < 0:
        pb = pb[::-1]
    return pa, pb


def intersection_area(a, b) -> float:
    pa, pb = _prepare(a, b)
    ax = [p[0] for p in pa]
    ay = [p[1] for p in pa]
    bx = [p[0] for p in pb]
    by = [p[1] for p in pb]
    if max(ax) <= min(bx) or max(bx) <= min(ax) or max(ay) <= min(by) or max(by) <= min(ay):
        return 0.0
    total = 0.0
    for sa, qa in _pieces(pa):
        for sb, qb in _pieces(pb):
            total += sa * sb * convex_clip_area(qa, qb)
    return max(total, 0.0)


def iou(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape == b.shape and np.array_equal(a, b):
        return 1.0
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    union = abs(signed_area(_as_pts(a))) + abs(signed_area(_as_pts(b))) - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, inter / union)


def iou_pairs(rings_a, rings_b, ia, ib) -> np.ndarray:
    """IoU of ``rings_a[ia[k]]`` with ``rings_b[ib[k]]`` for every k."""
    ra = np.asarray(rings_a, dtype=float)
    rb = np.asarray(rings_b, dtype=float)
    ia = np.asarray(ia, dtype=np.int64)
    ib = np.asarray(ib, dtype=np.int64)
    out = np.empty(len(ia))
    for k in range(len(ia)):
        out[k] = iou(ra[ia[k]], rb[ib[k]])
    return out
