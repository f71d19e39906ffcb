# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled polygon intersection kernel.

Same algorithm as ``_polyclip_py``: signed convex decomposition plus
Sutherland-Hodgman clipping. Rings are limited to ``MAXV`` vertices.
"""

import numpy as np

BACKEND = "cython"

cdef enum:
    MAXV = 16
    BUF = 64

cdef struct Piece:
    double sign
    int n
    double x[MAXV]
    double y[MAXV]


cdef double _signed_area(const double* x, const double* y, int n) nogil:
    cdef double s = 0.0
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        s += x[i] * y[j] - x[j] * y[i]
    return 0.5 * s


cdef bint _is_convex_ccw(const double* x, const double* y, int n) nogil:
    cdef int i, j, k
    for i in range(n):
        j = (i + 1) % n
        k = (i + 2) % n
        if (x[j] - x[i]) * (y[k] - y[j]) - (y[j] - y[i]) * (x[k] - x[j]) < 0:
            return False
    return True


cdef int _pieces(const double* x, const double* y, int n, Piece* out) nogil:
    cdef int i, m = 0
    cdef double tx[3]
    cdef double ty[3]
    cdef double sa
    if _is_convex_ccw(x, y, n):
        out[0].sign = 1.0
        out[0].n = n
        for i in range(n):
            out[0].x[i] = x[i]
            out[0].y[i] = y[i]
        return 1
    for i in range(1, n - 1):
        tx[0] = x[0]; ty[0] = y[0]
        tx[1] = x[i]; ty[1] = y[i]
        tx[2] = x[i + 1]; ty[2] = y[i + 1]
        sa = _signed_area(tx, ty, 3)
        if sa > 0:
            out[m].sign = 1.0
            out[m].n = 3
            out[m].x[0] = tx[0]; out[m].y[0] = ty[0]
            out[m].x[1] = tx[1]; out[m].y[1] = ty[1]
            out[m].x[2] = tx[2]; out[m].y[2] = ty[2]
            m += 1
        elif sa < 0:
            out[m].sign = -1.0
            out[m].n = 3
            out[m].x[0] = tx[2]; out[m].y[0] = ty[2]
            out[m].x[1] = tx[1]; out[m].y[1] = ty[1]
            out[m].x[2] = tx[0]; out[m].y[2] = ty[0]
            m += 1
    return m


cdef double _convex_clip_area(const Piece* s, const Piece* c) nogil:
    cdef double ax[BUF]
    cdef double ay[BUF]
    cdef double bx[BUF]
    cdef double by[BUF]
    cdef double* inx = ax
    cdef double* iny = ay
    cdef double* outx = bx
    cdef double* outy = by
    cdef double* tmp
    cdef int nin, nout, i, k
    cdef double c1x, c1y, ex, ey, sx, sy, ds, px, py, dp, t, area

    nout = s.n
    for k in range(nout):
        outx[k] = s.x[k]
        outy[k] = s.y[k]
    for i in range(c.n):
        if nout == 0:
            return 0.0
        c1x = c.x[i]
        c1y = c.y[i]
        k = i + 1
        if k == c.n:
            k = 0
        ex = c.x[k] - c1x
        ey = c.y[k] - c1y
        tmp = inx; inx = outx; outx = tmp
        tmp = iny; iny = outy; outy = tmp
        nin = nout
        nout = 0
        sx = inx[nin - 1]
        sy = iny[nin - 1]
        ds = ex * (sy - c1y) - ey * (sx - c1x)
        for k in range(nin):
            px = inx[k]
            py = iny[k]
            dp = ex * (py - c1y) - ey * (px - c1x)
            if dp >= 0:
                if ds < 0:
                    t = ds / (ds - dp)
                    outx[nout] = sx + t * (px - sx)
                    outy[nout] = sy + t * (py - sy)
                    nout += 1
                outx[nout] = px
                outy[nout] = py
                nout += 1
            elif ds >= 0:
                t = ds / (ds - dp)
                outx[nout] = sx + t * (px - sx)
                outy[nout] = sy + t * (py - sy)
                nout += 1
            sx = px
            sy = py
            ds = dp
    if nout < 3:
        return 0.0
    area = _signed_area(outx, outy, nout)
    return area if area > 0 else 0.0


cdef bint _less(const double* a, int na, const double* b, int nb) nogil:
    # lexicographic over interleaved (x, y) coordinates, shorter-is-less on ties
    cdef int i, m = na if na < nb else nb
    for i in range(2 * m):
        if a[i] < b[i]:
            return True
        if a[i] > b[i]:
            return False
    return na < nb


cdef double _intersection(const double* a, int na, const double* b, int nb) nogil:
    cdef double pax[MAXV]
    cdef double pay[MAXV]
    cdef double pbx[MAXV]
    cdef double pby[MAXV]
    cdef Piece qa[MAXV]
    cdef Piece qb[MAXV]
    cdef const double* t
    cdef int i, tn, ma, mb, j
    cdef double ox, oy, total, sw
    cdef double amin, amax, bmin, bmax, aymin, aymax, bymin, bymax

    if _less(b, nb, a, na):
        t = a; a = b; b = t
        tn = na; na = nb; nb = tn
    ox = a[0]
    oy = a[1]
    for i in range(na):
        pax[i] = a[2 * i] - ox
        pay[i] = a[2 * i + 1] - oy
    for i in range(nb):
        pbx[i] = b[2 * i] - ox
        pby[i] = b[2 * i + 1] - oy
    if _signed_area(pax, pay, na) < 0:
        for i in range(na // 2):
            sw = pax[i]; pax[i] = pax[na - 1 - i]; pax[na - 1 - i] = sw
            sw = pay[i]; pay[i] = pay[na - 1 - i]; pay[na - 1 - i] = sw
    if _signed_area(pbx, pby, nb) < 0:
        for i in range(nb // 2):
            sw = pbx[i]; pbx[i] = pbx[nb - 1 - i]; pbx[nb - 1 - i] = sw
            sw = pby[i]; pby[i] = pby[nb - 1 - i]; pby[nb - 1 - i] = sw

    amin = amax = pax[0]
    aymin = aymax = pay[0]
    for i in range(1, na):
        amin = min(amin, pax[i]); amax = max(amax, pax[i])
        aymin = min(aymin, pay[i]); aymax = max(aymax, pay[i])
    bmin = bmax = pbx[0]
    bymin = bymax = pby[0]
    for i in range(1, nb):
        bmin = min(bmin, pbx[i]); bmax = max(bmax, pbx[i])
        bymin = min(bymin, pby[i]); bymax = max(bymax, pby[i])
    if amax <= bmin or bmax <= amin or aymax <= bymin or bymax <= aymin:
        return 0.0

    ma = _pieces(pax, pay, na, qa)
    mb = _pieces(pbx, pby, nb, qb)
    total = 0.0
    for i in range(ma):
        for j in range(mb):
            total += qa[i].sign * qb[j].sign * _convex_clip_area(&qa[i], &qb[j])
    return total if total > 0 else 0.0


cdef double _iou(const double* a, int na, const double* b, int nb) nogil:
    cdef int i
    cdef bint same = na == nb
    cdef double inter, union
    if same:
        for i in range(2 * na):
            if a[i] != b[i]:
                same = False
                break
    if same:
        return 1.0
    inter = _intersection(a, na, b, nb)
    if inter <= 0:
        return 0.0
    union = (_fabs(_signed_area_flat(a, na)) + _fabs(_signed_area_flat(b, nb))) - inter
    if union <= 0:
        return 0.0
    inter = inter / union
    return inter if inter < 1.0 else 1.0


cdef inline double _fabs(double v) nogil:
    return -v if v < 0 else v


cdef double _signed_area_flat(const double* p, int n) nogil:
    cdef double s = 0.0
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        s += p[2 * i] * p[2 * j + 1] - p[2 * j] * p[2 * i + 1]
    return 0.5 * s


def _ring(r):
    arr = np.ascontiguousarray(r, dtype=np.float64).reshape(-1, 2)
    if not 3 <= arr.shape[0] <= MAXV:
        raise ValueError(f"ring must have 3..{MAXV} vertices")
    return arr


def signed_area(ring):
    cdef const double[:, ::1] a = _ring(ring)
    return _signed_area_flat(&a[0, 0], a.shape[0])


def intersection_area(a, b):
    cdef const double[:, ::1] ra = _ring(a)
    cdef const double[:, ::1] rb = _ring(b)
    return _intersection(&ra[0, 0], ra.shape[0], &rb[0, 0], rb.shape[0])


def iou(a, b):
    cdef const double[:, ::1] ra = _ring(a)
    cdef const double[:, ::1] rb = _ring(b)
    return _iou(&ra[0, 0], ra.shape[0], &rb[0, 0], rb.shape[0])


def iou_pairs(rings_a, rings_b, ia, ib):
    """IoU of ``rings_a[ia[k]]`` with ``rings_b[ib[k]]`` for every k."""
    cdef const double[:, :, ::1] ra = np.ascontiguousarray(rings_a, dtype=np.float64)
    cdef const double[:, :, ::1] rb = np.ascontiguousarray(rings_b, dtype=np.float64)
    cdef const long long[::1] ja = np.ascontiguousarray(ia, dtype=np.int64)
    cdef const long long[::1] jb = np.ascontiguousarray(ib, dtype=np.int64)
    cdef Py_ssize_t k, n = ja.shape[0]
    cdef int na = ra.shape[1], nb = rb.shape[1]
    if ja.shape[0] != jb.shape[0]:
        raise ValueError("index arrays differ in length")
    if not (3 <= na <= MAXV and 3 <= nb <= MAXV):
        raise ValueError(f"rings must have 3..{MAXV} vertices")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    if n == 0:
        return out
    for k in range(n):
        if not (0 <= ja[k] < ra.shape[0] and 0 <= jb[k] < rb.shape[0]):
            raise IndexError("ring index out of range")
    with nogil:
        for k in range(n):
            o[k] = _iou(&ra[ja[k], 0, 0], na, &rb[jb[k], 0, 0], nb)
    return out
