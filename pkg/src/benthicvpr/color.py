"""Multi-image gray-world correction.

Per-pixel, per-channel mean and standard deviation are estimated over
all images of one camera and visit; each image is then mapped affinely so
the set's mean and spread match fixed targets. Intensities are floats in
[0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import DimensionMismatch, EmptyStream

STD_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class PixelStats:
    mean: np.ndarray
    std: np.ndarray
    count: int

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mean.shape


@dataclass(frozen=True)
class CorrectionTargets:
    target_mean: float = 0.35
    target_std: float = 0.12
    clip: bool = True

    def __post_init__(self):
        if not (0 < self.target_mean < 1):
            raise ValueError("target_mean must lie in (0, 1)")
        if not self.target_std > 0:
            raise ValueError("target_std must be positive")


def _as_image(img) -> np.ndarray:
    a = np.asarray(img, dtype=float)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise DimensionMismatch(f"image must be HxW or HxWxC, got shape {a.shape}")
    return a


class StatsAccumulator:
    """Streaming per-cell mean/variance (Welford), mergeable across workers."""

    def __init__(self):
        self.n = 0
        self.mean: Optional[np.ndarray] = None
        self.m2: Optional[np.ndarray] = None

    def add(self, img) -> None:
        x = _as_image(img)
        if self.mean is None:
            self.n = 1
            self.mean = x.copy()
            self.m2 = np.zeros_like(x)
            return
        if x.shape != self.mean.shape:
            raise DimensionMismatch(f"image shape {x.shape} != {self.mean.shape}")
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return self
        if other.mean.shape != self.mean.shape:
            raise DimensionMismatch(f"accumulator shapes differ: {other.mean.shape} vs {self.mean.shape}")
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        self.n = n
        return self

    def result(self) -> PixelStats:
        if self.n == 0:
            raise EmptyStream("no images accumulated")
        # population variance: the set being equalized is the whole population
        var = np.maximum(self.m2 / self.n, 0.0)
        return PixelStats(self.mean.copy(), np.sqrt(var), self.n)


def accumulate_stats(images: Iterable) -> PixelStats:
    acc = StatsAccumulator()
    for img in images:
        acc.add(img)
    return acc.result()


def correct_image(img, stats: PixelStats, targets: CorrectionTargets = CorrectionTargets(), eps: float = STD_FLOOR) -> np.ndarray:
    """Map ``img`` so the set it was drawn from has the target mean and std per cell."""
    squeeze = np.asarray(img).ndim == 2
    x = _as_image(img)
    if x.shape != stats.mean.shape:
        raise DimensionMismatch(f"image shape {x.shape} != stats shape {stats.mean.shape}")
    gain = targets.target_std / np.maximum(stats.std, eps)
    out = targets.target_mean + (x - stats.mean) * gain
    if targets.clip:
        out = np.clip(out, 0.0, 1.0)
    return out[:, :, 0] if squeeze else out
