"""Camera geometry, rigid transforms, nearest-neighbour queries, chamfer and ICP.

Conventions
-----------
Camera frame: +X right, +Y down, +Z along the optical axis. Depth is
z-depth (distance along the optical axis), not ray length. Pixel ``u`` is
the column and ``v`` the row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    EmptyCloudError,
    InvalidDepthError,
    InvalidParameterError,
    InvalidPoseError,
)

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; all values in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidParameterError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidParameterError(f"frame size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidParameterError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} frame"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width), the numpy raster shape."""
        return (self.height, self.width)


class RigidTransform:
    """Rotation plus translation, ``p -> R @ p + t``.

    Instances are immutable; arrays are copied and flagged read-only.
    Equality is bit-exact, use :meth:`allclose` for tolerance checks.
    """

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation=None, translation=None, *, validate: bool = True):
        rot = np.eye(3) if rotation is None else np.array(rotation, dtype=np.float64)
        trans = np.zeros(3) if translation is None else np.array(translation, dtype=np.float64)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise InvalidPoseError(f"bad transform shapes {rot.shape}, {trans.shape}")
        if validate:
            check_rotation(rot)
            if not np.all(np.isfinite(trans)):
                raise InvalidPoseError("translation must be finite")
        rot.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    def __setattr__(self, name, value):
        raise AttributeError("RigidTransform is immutable")

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> RigidTransform:
        return cls(np.eye(3), [x, y, z])

    @classmethod
    def from_matrix(cls, matrix) -> RigidTransform:
        m = np.asarray(matrix, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_list(cls, values: Sequence[float]) -> RigidTransform:
        """Parse 12 numbers: row-major 3x3 rotation followed by translation."""
        if len(values) != 12:
            raise InvalidPoseError(f"expected 12 numbers for a pose, got {len(values)}")
        arr = np.asarray(values, dtype=np.float64)
        return cls(arr[:9].reshape(3, 3), arr[9:])

    def to_list(self) -> list[float]:
        return [float(x) for x in self.rotation.reshape(-1)] + [float(x) for x in self.translation]

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation, validate=False)

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        """Composition: ``(a @ b).apply(p) == a.apply(b.apply(p))``."""
        rot = self.rotation @ other.rotation
        trans = self.rotation @ other.translation + self.translation
        return RigidTransform(_reorthonormalize(rot), trans, validate=False)

    def apply(self, points) -> np.ndarray:
        """Transform an (N, 3) array or a single 3-vector."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        """Rotation magnitude in radians."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(math.acos(min(1.0, max(-1.0, c))))

    def allclose(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol, rtol=0)
            and np.allclose(self.translation, other.translation, atol=atol, rtol=0)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self) -> str:
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def check_rotation(rot: np.ndarray, tol: float = ORTHONORMAL_TOL) -> None:
    if not np.all(np.isfinite(rot)):
        raise InvalidPoseError("rotation must be finite")
    if np.max(np.abs(rot.T @ rot - np.eye(3))) > tol:
        raise InvalidPoseError("rotation is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > tol:
        raise InvalidPoseError("rotation determinant is not +1")


def _reorthonormalize(rot: np.ndarray) -> np.ndarray:
    # keeps long compositions inside the 1e-9 orthonormality budget
    u, _, vt = np.linalg.svd(rot)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix, ``angle`` in radians."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


@dataclass
class PointCloud:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    frame_id: str = "world"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("point cloud contains non-finite coordinates")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    def transformed(self, transform: RigidTransform, frame_id: str | None = None) -> PointCloud:
        return PointCloud(transform.apply(self.points), frame_id or self.frame_id)


# --------------------------------------------------------------------------
# projection
# --------------------------------------------------------------------------


def reproject_pixel(u: float, v: float, depth: float, K: CameraIntrinsics) -> np.ndarray:
    if not (math.isfinite(depth) and depth > 0):
        raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
    return np.array([(u - K.cx) / K.fx * depth, (v - K.cy) / K.fy * depth, float(depth)])


def project_point(p, K: CameraIntrinsics) -> tuple[float, float, float]:
    x, y, z = (float(c) for c in p)
    if not z > 0:
        raise BehindCameraError(f"point with z={z} is not in front of the camera")
    return (K.fx * x / z + K.cx, K.fy * y / z + K.cy, z)


def reproject_depth(depth: np.ndarray, K: CameraIntrinsics, mask: np.ndarray | None = None) -> np.ndarray:
    """Vectorised reprojection of every valid (masked) pixel, row-major order.

    Pixels with depth 0 or non-finite depth are skipped.
    """
    valid = (depth > 0) & np.isfinite(depth)
    if mask is not None:
        valid &= mask
    v, u = np.nonzero(valid)
    d = depth[v, u].astype(np.float64)
    return np.column_stack(((u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d))


def transform_point(T: RigidTransform, p) -> np.ndarray:
    return T.apply(np.asarray(p, dtype=np.float64))


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """One centroid per occupied voxel, ordered by voxel key (deterministic)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return pts
    inverse, n_voxels = _voxel_inverse(voxel_keys(pts, voxel_size))
    counts = np.bincount(inverse, minlength=n_voxels).astype(np.float64)
    out = np.empty((n_voxels, 3))
    for c in range(3):
        out[:, c] = np.bincount(inverse, weights=pts[:, c], minlength=n_voxels) / counts
    return out


def voxel_keys(points: np.ndarray, voxel_size: float) -> np.ndarray:
    if not (voxel_size > 0 and math.isfinite(voxel_size)):
        raise InvalidParameterError(f"voxel size must be positive and finite, got {voxel_size}")
    return np.floor(np.asarray(points, dtype=np.float64) / voxel_size).astype(np.int64)


_PACK_LIMIT = 1 << 20


def _pack_keys(keys: np.ndarray) -> np.ndarray:
    # 21 bits per axis; callers check the range first
    k = keys + (1 << 20)
    return (k[:, 0] << 42) | (k[:, 1] << 21) | k[:, 2]


def _voxel_inverse(keys: np.ndarray) -> tuple[np.ndarray, int]:
    # pack (kx, ky, kz) into one int64; ordering stays lexicographic
    shifted = keys - keys.min(axis=0)
    span = shifted.max(axis=0) + 1
    packed = (shifted[:, 0] * span[1] + shifted[:, 1]) * span[2] + shifted[:, 2]
    uniq, inverse = np.unique(packed, return_inverse=True)
    return inverse.reshape(-1), len(uniq)


# --------------------------------------------------------------------------
# nearest neighbours
# --------------------------------------------------------------------------


class SpatialIndex:
    """Exact nearest-neighbour index over a fixed point set (k-d tree)."""

    def __init__(self, points: np.ndarray):
        pts = np.array(points, dtype=np.float64).reshape(-1, 3)
        pts.flags.writeable = False
        self._points = pts
        self._tree = cKDTree(pts) if len(pts) else None
        self._cells: dict[float, np.ndarray] = {}

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def query(self, points, upper_bound: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        """Distances and indices of nearest indexed points.

        With a finite ``upper_bound`` neighbours farther than it report
        ``inf`` (and index ``len(self)``); nearer ones are still exact.
        """
        q = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if self._tree is None or len(q) == 0:
            return np.full(len(q), np.inf), np.full(len(q), len(self._points), dtype=np.intp)
        d, idx = self._tree.query(q, k=1, distance_upper_bound=upper_bound)
        return np.asarray(d, dtype=np.float64), np.asarray(idx, dtype=np.intp)

    def distances(self, points, upper_bound: float = np.inf) -> np.ndarray:
        return self.query(points, upper_bound)[0]

    def within(self, points, radius: float) -> np.ndarray:
        """Exact test ``nearest distance <= radius`` for every query point.

        A query sharing a grid cell of edge ``radius / sqrt(3)`` with an
        indexed point is within ``radius`` by construction; only the rest go
        through the tree.
        """
        q = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(self._points) == 0 or len(q) == 0:
            return np.zeros(len(q), dtype=bool)
        inside = np.zeros(len(q), dtype=bool)
        if radius > 0 and math.isfinite(radius):
            cell = radius / math.sqrt(3.0) * (1 - 1e-9)
            occupied = self._cells.get(cell)
            if occupied is None:
                keys = voxel_keys(self._points, cell)
                occupied = np.unique(_pack_keys(keys)) if np.abs(keys).max() < _PACK_LIMIT else None
                self._cells[cell] = occupied
            qkeys = voxel_keys(q, cell)
            if occupied is not None and np.abs(qkeys).max() < _PACK_LIMIT:
                inside = np.isin(_pack_keys(qkeys), occupied)
        rest = np.flatnonzero(~inside)
        if len(rest):
            bound = radius * (1 + 1e-9) + 1e-12
            d = self.distances(q[rest], upper_bound=bound)
            inside[rest] = d <= radius
        return inside


def build_index(cloud: PointCloud | np.ndarray) -> SpatialIndex:
    pts = cloud.points if isinstance(cloud, PointCloud) else cloud
    return SpatialIndex(pts)


def nearest_distance(index: SpatialIndex, p) -> float:
    return float(index.distances(np.asarray(p, dtype=np.float64).reshape(1, 3))[0])


def nearest_rank_percentile(values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest value (at least the 1st)."""
    if not 0.0 <= q <= 1.0:
        raise InvalidParameterError(f"percentile fraction must lie in [0, 1], got {q}")
    if len(values) == 0:
        return math.inf
    rank = max(1, math.ceil(q * len(values)))
    return float(np.partition(values, rank - 1)[rank - 1])


def percentile_set_distance(query: PointCloud | np.ndarray, target: SpatialIndex, q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise InvalidParameterError(f"percentile fraction must lie in [0, 1], got {q}")
    pts = query.points if isinstance(query, PointCloud) else np.asarray(query).reshape(-1, 3)
    if len(pts) == 0 or len(target) == 0:
        return math.inf
    return nearest_rank_percentile(target.distances(pts), q)


# --------------------------------------------------------------------------
# chamfer
# --------------------------------------------------------------------------


def chamfer_distance(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray) -> float:
    """Symmetric mean of nearest-point distances, in the clouds' units."""
    pa = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=np.float64).reshape(-1, 3)
    pb = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyCloudError("chamfer distance needs two non-empty clouds")
    ab = SpatialIndex(pb).distances(pa)
    ba = SpatialIndex(pa).distances(pb)
    return 0.5 * (float(np.mean(ab)) + float(np.mean(ba)))


# --------------------------------------------------------------------------
# ICP
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    convergence_tol: float = 1e-6
    max_correspondence_dist: float = 0.05

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if not (self.convergence_tol > 0 and self.max_correspondence_dist > 0):
            raise InvalidParameterError("ICP tolerances must be positive")


def is_degenerate(points: np.ndarray) -> bool:
    if len(points) < 3:
        return True
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return s[0] == 0 or s[1] <= 1e-9 * s[0]


def fit_rigid_transform(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rotation and translation taking ``src`` onto ``dst`` (Kabsch)."""
    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    h = (src - c_src).T @ (dst - c_dst)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    rot = _reorthonormalize(rot)
    return RigidTransform(rot, c_dst - rot @ c_src, validate=False)


def icp_align(
    source: PointCloud | np.ndarray,
    target: PointCloud | np.ndarray | SpatialIndex,
    params: IcpParams | None = None,
    init: RigidTransform | None = None,
) -> tuple[RigidTransform, float]:
    """Point-to-point ICP registering ``source`` onto ``target``.

    Returns the full transform (``init`` included) and the mean distance of
    the final correspondences.
    """
    params = params or IcpParams()
    transform = init or RigidTransform.identity()
    src = source.points if isinstance(source, PointCloud) else np.asarray(source, dtype=np.float64).reshape(-1, 3)
    if isinstance(target, SpatialIndex):
        index = target
    else:
        index = build_index(target)
    tgt = index.points
    if is_degenerate(src) or is_degenerate(tgt):
        raise DegenerateGeometryError("ICP needs at least 3 non-collinear points in each cloud")

    def correspond(t: RigidTransform):
        moved = t.apply(src)
        d, idx = index.query(moved, params.max_correspondence_dist)
        ok = np.isfinite(d)
        return moved, d, idx, ok

    prev_residual = math.inf
    for _ in range(params.max_iterations):
        moved, d, idx, ok = correspond(transform)
        if is_degenerate(moved[ok]):
            raise DegenerateGeometryError(f"only {int(ok.sum())} usable correspondences")
        residual = float(np.mean(d[ok]))
        step = fit_rigid_transform(moved[ok], tgt[idx[ok]])
        transform = step @ transform
        if abs(prev_residual - residual) < params.convergence_tol:
            break
        prev_residual = residual

    _, d, _, ok = correspond(transform)
    if not ok.any():
        raise DegenerateGeometryError("ICP diverged: no correspondences left")
    return transform, float(np.mean(d[ok]))
