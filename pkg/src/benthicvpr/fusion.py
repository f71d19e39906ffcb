"""Global scale/offset alignment of a relative range map to a metric one.

Both inputs must already share one pixel grid; reprojecting a stereo map
into the monocular camera's (distorted) pixel frame is the caller's job.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateRelativeMap, DimensionMismatch, TooFewSamples

log = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True, eq=False)
class RangeMap:
    """Row-major ``(height, width)`` grid of ranges along the optical axis; NaN marks invalid cells."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("range map must be 2-D")
        v[~np.isfinite(v)] = np.nan
        if np.any(v <= 0):
            raise ValueError("finite ranges must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    @classmethod
    def constant(cls, width: int, height: int, value: float) -> "RangeMap":
        return cls(np.full((height, width), float(value)))


@dataclass(frozen=True)
class FusionParams:
    valid_min: float = 0.2
    valid_max: float = 6.0
    sample_fraction: float = 0.10
    huber_delta: float = 0.1
    seed: Seed = 0
    min_samples: int = 10
    max_iter: int = 50
    tol: float = 1e-10

    def __post_init__(self):
        if not (0 < self.valid_min < self.valid_max):
            raise ValueError("need 0 < valid_min < valid_max")
        if not (0 < self.sample_fraction <= 1):
            raise ValueError("sample_fraction must lie in (0, 1]")
        if self.min_samples < 2:
            raise ValueError("min_samples must be at least 2")
        if not self.huber_delta > 0:
            raise ValueError("huber_delta must be positive")


@dataclass(frozen=True)
class ScaleOffset:
    a: float
    b: float
    inlier_rmse: float
    sample_count: int
    iterations: int = 0


def mask_ranges(rmap: RangeMap, params: FusionParams) -> RangeMap:
    """Invalidate cells outside ``[valid_min, valid_max]``."""
    v = rmap.values.copy()
    with np.errstate(invalid="ignore"):
        v[(v < params.valid_min) | (v > params.valid_max)] = np.nan
    return RangeMap(v)


def apply_mask(rmap: RangeMap, keep: np.ndarray) -> RangeMap:
    """Invalidate every cell where ``keep`` is False (e.g. a stereo validity mask)."""
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != rmap.values.shape:
        raise DimensionMismatch(f"mask shape {keep.shape} != map shape {rmap.values.shape}")
    v = rmap.values.copy()
    v[~keep] = np.nan
    return RangeMap(v)


def huber_irls(x: np.ndarray, y: np.ndarray, delta: float, max_iter: int = 50, tol: float = 1e-10):
    """Fit ``y ~ a*x + b`` under a Huber loss by iteratively reweighted least squares.

    Returns ``(a, b, residuals, iterations)``. Starts from ordinary least
    squares; stops when neither parameter moves by more than ``tol``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x)
    a = b = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        sw = w.sum()
        xm = (w * x).sum() / sw
        ym = (w * y).sum() / sw
        dx = x - xm
        sxx = (w * dx * dx).sum()
        if sxx <= 0:
            raise DegenerateRelativeMap("no spread in weighted relative ranges")
        a_new = (w * dx * (y - ym)).sum() / sxx
        b_new = ym - a_new * xm
        converged = it > 1 and abs(a_new - a) < tol and abs(b_new - b) < tol
        a, b = a_new, b_new
        if converged:
            break
        r = np.abs(a * x + b - y)
        w = np.where(r <= delta, 1.0, delta / np.maximum(r, 1e-300))
    return a, b, a * x + b - y, it


def _joint_samples(stereo: RangeMap, relative: RangeMap, params: FusionParams):
    if stereo.values.shape != relative.values.shape:
        raise DimensionMismatch(
            f"stereo map {stereo.values.shape} and relative map {relative.values.shape} differ"
        )
    masked = mask_ranges(stereo, params)
    joint = masked.valid & relative.valid
    idx = np.flatnonzero(joint.ravel())
    k = int(round(params.sample_fraction * idx.size))
    if k < params.min_samples:
        raise TooFewSamples(f"{k} sampled pairs < min_samples={params.min_samples}")
    rng = np.random.default_rng(params.seed)
    pick = np.sort(rng.choice(idx, size=k, replace=False))
    return relative.values.ravel()[pick], masked.values.ravel()[pick]


def fit_scale_offset(stereo: RangeMap, relative: RangeMap, params: FusionParams = FusionParams()) -> ScaleOffset:
    """Robust ``(a, b)`` with ``a * relative + b ~ stereo`` on a seeded pixel sample."""
    z_rel, z_st = _joint_samples(stereo, relative, params)
    if np.ptp(z_rel) <= 1e-12 * np.max(np.abs(z_rel)):
        raise DegenerateRelativeMap("sampled relative ranges are constant")
    a, b, res, it = huber_irls(z_rel, z_st, params.huber_delta, params.max_iter, params.tol)
    inl = np.abs(res) <= params.huber_delta
    rmse = float(np.sqrt(np.mean(res[inl] ** 2))) if inl.any() else float(np.sqrt(np.mean(res**2)))
    log.debug("scale/offset a=%.6g b=%.6g after %d iterations (%d samples)", a, b, it, len(z_rel))
    return ScaleOffset(float(a), float(b), rmse, int(len(z_rel)), it)


def apply_scale_offset(relative: RangeMap, so: ScaleOffset) -> RangeMap:
    v = so.a * relative.values + so.b
    with np.errstate(invalid="ignore"):
        v[v <= 0] = np.nan
    return RangeMap(v)


def fuse(stereo: RangeMap, relative: RangeMap, params: FusionParams = FusionParams()):
    """Fit on the sampled joint-valid pixels, then rescale the full relative map."""
    so = fit_scale_offset(stereo, relative, params)
    return apply_scale_offset(relative, so), so
