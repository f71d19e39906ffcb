"""Pinhole camera model, rigid and similarity transforms, Umeyama alignment.

Conventions follow OpenCV: camera x right, y down, z along the optical
axis; pixel origin at the top-left image corner. A transform named
``t_a_to_b`` maps point coordinates expressed in frame ``a`` into frame
``b``: ``p_b = R @ p_a + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    EmptyInput,
    NonPositiveRange,
    PointBehindCamera,
)

ORTHO_TOL = 1e-9
QUAT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    alpha_x: float
    alpha_y: float
    u0: float
    v0: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.alpha_x > 0 and self.alpha_y > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x: float, fov_y: float) -> "Intrinsics":
        """Centered principal point, focal lengths from full fields of view (radians)."""
        return cls(
            alpha_x=0.5 * width / np.tan(0.5 * fov_x),
            alpha_y=0.5 * height / np.tan(0.5 * fov_y),
            u0=0.5 * width,
            v0=0.5 * height,
            width=int(width),
            height=int(height),
        )

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.alpha_x, 0.0, self.u0], [0.0, self.alpha_y, self.v0], [0.0, 0.0, 1.0]]
        )

    @property
    def fov_x(self) -> float:
        return 2.0 * np.arctan(0.5 * self.width / self.alpha_x)

    @property
    def fov_y(self) -> float:
        return 2.0 * np.arctan(0.5 * self.height / self.alpha_y)


def quaternion_to_matrix(q: Sequence[float], tol: float = QUAT_NORM_TOL) -> np.ndarray:
    """Rotation matrix from a unit quaternion ``[w, x, y, z]``.

    Quaternions whose norm deviates from 1 by more than ``tol`` are
    rejected; smaller deviations are normalized away.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"quaternion must be 4 finite numbers, got {q!r}")
    n = np.linalg.norm(q)
    if abs(n - 1.0) > tol:
        raise ValueError(f"quaternion norm {n} is not 1 within {tol}")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Unit quaternion ``[w, x, y, z]`` with ``w >= 0`` for a rotation matrix."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def rotation_about_axis(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    Kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * Kx + (1 - np.cos(angle)) * Kx @ Kx


def _check_rotation(R: np.ndarray) -> np.ndarray:
    R = np.array(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1) > ORTHO_TOL:
        raise ValueError("rotation is not orthonormal with determinant +1")
    R.setflags(write=False)
    return R


def _check_vector(t) -> np.ndarray:
    t = np.array(t, dtype=float).reshape(3)
    if not np.all(np.isfinite(t)):
        raise ValueError("translation must be finite")
    t.setflags(write=False)
    return t


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", _check_vector(self.translation))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_quaternion(cls, q: Sequence[float], t: Sequence[float]) -> "RigidTransform":
        return cls(quaternion_to_matrix(q), t)

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "RigidTransform":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def as_quaternion(self) -> np.ndarray:
        return matrix_to_quaternion(self.rotation)

    def apply(self, points) -> np.ndarray:
        """Transform a 3-vector or an ``(N, 3)`` array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        # (self @ other).apply(p) == self.apply(other.apply(p))
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return np.allclose(self.rotation, other.rotation, atol=atol) and np.allclose(
            self.translation, other.translation, atol=atol
        )


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("scale must be positive")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", _check_vector(self.translation))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.scale * (p @ self.rotation.T) + self.translation

    def inverse(self) -> "SimilarityTransform":
        Rt = self.rotation.T
        s = 1.0 / self.scale
        return SimilarityTransform(s, Rt, -s * (Rt @ self.translation))

    def __matmul__(self, other: "SimilarityTransform") -> "SimilarityTransform":
        return SimilarityTransform(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * (self.rotation @ other.translation) + self.translation,
        )

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.scale * self.rotation
        T[:3, 3] = self.translation
        return T


@dataclass(frozen=True, eq=False)
class CameraView:
    """One image capture.

    ``pose_local`` is the vehicle pose ``T(l->v)``, mapping local NED
    coordinates into the vehicle frame at capture time.
    """

    view_id: str
    visit_id: str
    camera_id: str
    pose_local: RigidTransform
    altitude: Optional[float] = None
    t_unix: Optional[float] = None

    def local_to_camera(self, extrinsic: RigidTransform) -> RigidTransform:
        """``T(l->c) = T(v->c) @ T(l->v)``."""
        return extrinsic @ self.pose_local

    def camera_center(self, extrinsic: RigidTransform) -> np.ndarray:
        """Optical center in the local frame."""
        return self.local_to_camera(extrinsic).inverse().translation.copy()


def project(intr: Intrinsics, t_l_to_c: RigidTransform, p_local) -> np.ndarray:
    """Pixel coordinates of local point(s); no clamping to the image bounds."""
    p_cam = np.atleast_2d(t_l_to_c.apply(p_local))
    z = p_cam[:, 2]
    if np.any(z <= 0):
        raise PointBehindCamera("point lies at or behind the camera plane")
    u = intr.alpha_x * p_cam[:, 0] / z + intr.u0
    v = intr.alpha_y * p_cam[:, 1] / z + intr.v0
    out = np.column_stack([u, v])
    return out[0] if np.ndim(p_local) == 1 else out


def inverse_project(intr: Intrinsics, t_c_to_l: RigidTransform, pixel, range_z) -> np.ndarray:
    """Local point seen at ``pixel`` with range ``range_z`` along the optical axis."""
    px = np.atleast_2d(np.asarray(pixel, dtype=float))
    z = np.broadcast_to(np.asarray(range_z, dtype=float), (px.shape[0],))
    if not np.all(z > 0):
        raise NonPositiveRange("range along the optical axis must be positive")
    rays = np.column_stack(
        [(px[:, 0] - intr.u0) / intr.alpha_x, (px[:, 1] - intr.v0) / intr.alpha_y, np.ones(len(px))]
    )
    p_local = t_c_to_l.apply(rays * z[:, None])
    return p_local[0] if np.ndim(pixel) == 1 else p_local


def umeyama_align(source_pts, target_pts, with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity mapping ``source_pts`` onto ``target_pts``."""
    src = np.asarray(source_pts, dtype=float)
    dst = np.asarray(target_pts, dtype=float)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape != dst.shape:
        raise DegenerateConfiguration("need two equal-length lists of 3-vectors")
    if len(src) < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {len(src)}")

    n = len(src)
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    ds = src - mu_s
    dd = dst - mu_d

    sv = np.linalg.svd(ds, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateConfiguration("source points are collinear")

    cov = dd.T @ ds / n
    U, d, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    # re-orthonormalize against SVD round-off
    u2, _, vt2 = np.linalg.svd(R)
    R = u2 @ vt2

    if with_scale:
        var_s = (ds**2).sum() / n
        scale = float((d * np.diag(S)).sum() / var_s)
    else:
        scale = 1.0
    t = mu_d - scale * R @ mu_s
    return SimilarityTransform(scale, R, t)


@dataclass(frozen=True, eq=False)
class ErrorStats:
    mean: float
    median: float
    p99: float
    max: float
    count: int
    hist_counts: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "p99": self.p99,
            "max": self.max,
            "count": self.count,
            "histogram": {
                "counts": self.hist_counts.tolist(),
                "edges": self.hist_edges.tolist(),
            },
        }


def percentile(values, q: float) -> float:
    """Inclusive linear-interpolation percentile (``q`` in [0, 100])."""
    return float(np.percentile(np.asarray(values, dtype=float), q, method="linear"))


def registration_error_stats(correspondences, bins: int = 50) -> ErrorStats:
    """Distribution of Euclidean distances between corresponding points.

    ``correspondences`` is either a sequence of ``(p_target, p_source)``
    pairs or an array of shape ``(N, 2, 3)``.
    """
    arr = np.asarray(correspondences, dtype=float)
    if arr.size == 0:
        raise EmptyInput("no correspondences")
    arr = arr.reshape(-1, 2, 3)
    err = np.linalg.norm(arr[:, 0] - arr[:, 1], axis=1)
    # sort first so the result is independent of input order
    err = np.sort(err)
    top = err[-1] if err[-1] > 0 else 1.0
    counts, edges = np.histogram(err, bins=bins, range=(0.0, top))
    return ErrorStats(
        mean=float(np.mean(err)),
        median=percentile(err, 50),
        p99=percentile(err, 99),
        max=float(err[-1]),
        count=len(err),
        hist_counts=counts,
        hist_edges=edges,
    )
