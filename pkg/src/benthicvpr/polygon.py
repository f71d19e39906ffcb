"""Polygon area / intersection / IoU with a compiled kernel when available.

Set ``BENTHICVPR_PURE_PYTHON=1`` to force the pure-Python kernel.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _polyclip_py


def _load() -> ModuleType:
    if os.environ.get("BENTHICVPR_PURE_PYTHON", "") not in ("", "0"):
        return _polyclip_py
    try:
        from . import _polyclip
    except ImportError:
        return _polyclip_py
    return _polyclip


_kernel = _load()
BACKEND: str = _kernel.BACKEND


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _polyclip_py}
    try:
        from . import _polyclip

        out["cython"] = _polyclip
    except ImportError:
        pass
    return out


def signed_area(ring) -> float:
    r = np.asarray(ring, dtype=float).reshape(-1, 2)
    x, y = r[:, 0], r[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def area(ring) -> float:
    return abs(signed_area(ring))


def intersection_area(a, b) -> float:
    return _kernel.intersection_area(a, b)


def iou(a, b) -> float:
    return _kernel.iou(a, b)


def iou_pairs(rings_a, rings_b, ia, ib) -> np.ndarray:
    return _kernel.iou_pairs(rings_a, rings_b, ia, ib)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(ring) -> bool:
    """True unless two non-adjacent edges properly cross."""
    r = np.asarray(ring, dtype=float).reshape(-1, 2)
    n = len(r)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(r[i], r[(i + 1) % n], r[j], r[(j + 1) % n]):
                return False
    return True
