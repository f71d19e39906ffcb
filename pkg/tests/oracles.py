"""Reference implementations used only by the tests.

They deliberately share no code or algorithm with the package kernels.
"""

import numpy as np


def shoelace(pts):
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def hull(points):
    """Andrew's monotone chain, CCW, collinear points dropped."""
    pts = sorted(set(map(tuple, np.round(np.asarray(points, dtype=float), 15))))
    if len(pts) < 3:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _inside_convex(p, poly, eps=1e-12):
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -eps:
            return False
    return True


def _seg_intersections(a, b):
    out = []
    for i in range(len(a)):
        p, r = a[i], a[(i + 1) % len(a)] - a[i]
        for j in range(len(b)):
            q, s = b[j], b[(j + 1) % len(b)] - b[j]
            den = r[0] * s[1] - r[1] * s[0]
            if den == 0:
                continue
            qp = q - p
            t = (qp[0] * s[1] - qp[1] * s[0]) / den
            u = (qp[0] * r[1] - qp[1] * r[0]) / den
            if 0 <= t <= 1 and 0 <= u <= 1:
                out.append(p + t * r)
    return out


def convex_intersection_area(a, b):
    """Area of the hull of mutually-contained vertices and edge crossings."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if shoelace(a) < 0:
        a = a[::-1]
    if shoelace(b) < 0:
        b = b[::-1]
    pts = [p for p in a if _inside_convex(p, b)] + [p for p in b if _inside_convex(p, a)]
    pts += _seg_intersections(a, b)
    if len(pts) < 3:
        return 0.0
    return abs(shoelace(hull(pts)))


def ear_clip(ring):
    """Triangles of a simple polygon by ear clipping."""
    pts = [np.asarray(p, dtype=float) for p in ring]
    if shoelace(pts) < 0:
        pts = pts[::-1]
    idx = list(range(len(pts)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 1000:
        guard += 1
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if cross(a, b, c) <= 0:
                continue
            if any(
                cross(a, b, pts[m]) >= 0 and cross(b, c, pts[m]) >= 0 and cross(c, a, pts[m]) >= 0
                for m in idx
                if m not in (i0, i1, i2)
            ):
                continue
            tris.append(np.array([a, b, c]))
            idx.pop(k)
            break
    tris.append(np.array([pts[i] for i in idx]))
    return tris


def simple_intersection_area(a, b):
    return sum(convex_intersection_area(ta, tb) for ta in ear_clip(a) for tb in ear_clip(b))


def iou_oracle(a, b):
    inter = simple_intersection_area(a, b)
    return inter / (abs(shoelace(a)) + abs(shoelace(b)) - inter)


def random_convex_quad(rng, scale=1.0, center=(0.0, 0.0)):
    while True:
        h = hull(rng.uniform(-1, 1, (6, 2)))
        if len(h) >= 4:
            q = h[rng.choice(len(h), 4, replace=False)]
            q = hull(q)
            if len(q) == 4 and abs(shoelace(q)) > 0.05:
                return q * scale + np.asarray(center)


def random_star_quad(rng, scale=1.0, center=(0.0, 0.0)):
    """Simple, possibly non-convex quad: vertices at sorted angles around a center."""
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 4))
        gaps = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
        # every gap below pi keeps the center inside, so the ring is simple
        if gaps.min() < 0.3 or gaps.max() > np.pi - 0.1:
            continue
        r = rng.uniform(0.2, 1.0, 4)
        q = np.column_stack([r * np.cos(ang), r * np.sin(ang)]) * scale + np.asarray(center)
        if abs(shoelace(q)) > 0.02 * scale**2:
            return q


def _build_mc_kernel():
    import numba

    @numba.njit(cache=True)
    def stratified_hits(planes, x0, y0, w, h, side, seed):
        # planes: rows (nx, ny, c); a point is inside when nx*x + ny*y + c >= 0 for all
        state = np.uint64(seed * 2654435761 + 88172645463325252)
        scale = 1.0 / 9007199254740992.0
        hits = 0
        dx = w / side
        dy = h / side
        m = planes.shape[0]
        for i in range(side):
            for j in range(side):
                state ^= state << np.uint64(13)
                state ^= state >> np.uint64(7)
                state ^= state << np.uint64(17)
                ux = (state >> np.uint64(11)) * scale
                state ^= state << np.uint64(13)
                state ^= state >> np.uint64(7)
                state ^= state << np.uint64(17)
                uy = (state >> np.uint64(11)) * scale
                px = x0 + (i + ux) * dx
                py = y0 + (j + uy) * dy
                ok = True
                for k in range(m):
                    if planes[k, 0] * px + planes[k, 1] * py + planes[k, 2] < 0.0:
                        ok = False
                        break
                if ok:
                    hits += 1
        return hits

    return stratified_hits


def _half_planes(r):
    nxt = np.roll(r, -1, axis=0)
    e = nxt - r
    # left of each CCW edge: cross(e, p - a) >= 0
    return np.column_stack([-e[:, 1], e[:, 0], e[:, 1] * r[:, 0] - e[:, 0] * r[:, 1]])


_MC = None


def mc_intersection_area(a, b, samples=10_000_000, seed=0):
    """Jittered-stratified Monte-Carlo area of two convex rings over their common bounding box."""
    global _MC
    if _MC is None:
        _MC = _build_mc_kernel()
    a = _ccw(np.asarray(a, dtype=float))
    b = _ccw(np.asarray(b, dtype=float))
    x0 = max(a[:, 0].min(), b[:, 0].min())
    x1 = min(a[:, 0].max(), b[:, 0].max())
    y0 = max(a[:, 1].min(), b[:, 1].min())
    y1 = min(a[:, 1].max(), b[:, 1].max())
    if x1 <= x0 or y1 <= y0:
        return 0.0
    side = int(round(np.sqrt(samples)))
    planes = np.vstack([_half_planes(a), _half_planes(b)])
    hits = _MC(planes, x0, y0, x1 - x0, y1 - y0, side, seed)
    return hits / side**2 * (x1 - x0) * (y1 - y0)


def _ccw(r):
    return r if shoelace(r) > 0 else r[::-1].copy()
