"""Per-frame moving-region segmentation and candidate object masks.

Masks are plain ``(H, W)`` boolean numpy arrays at frame resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .dataset_io import Frame, ScanDataset
from .errors import InvalidParameterError, NoInteractionPhaseError, NoStaticPhaseError
from .geometry import (
    CameraIntrinsics,
    PointCloud,
    RigidTransform,
    SpatialIndex,
    build_index,
    percentile_set_distance,
    reproject_depth,
    voxel_downsample,
)

# 4-connectivity: diagonal neighbours are separate blobs
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Blob:
    label: int
    area: int
    bbox: tuple[int, int, int, int]  # row_min, col_min, row_max, col_max (inclusive)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 4-connected components; labels are 1..n in raster-scan order."""
    labels, n = ndimage.label(mask, structure=FOUR_CONNECTED)
    return labels, int(n)


def find_blobs(mask: np.ndarray) -> tuple[np.ndarray, list[Blob]]:
    labels, n = connected_components(mask)
    if n == 0:
        return labels, []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    slices = ndimage.find_objects(labels)
    blobs = [
        Blob(
            label=k,
            area=int(areas[k]),
            bbox=(sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1),
        )
        for k, sl in enumerate(slices, start=1)
    ]
    return labels, blobs


def detect_static_phase_end(arm_masks: Sequence[np.ndarray]) -> int:
    """Index of the first frame with a non-empty arm mask."""
    if len(arm_masks) == 0:
        raise InvalidParameterError("arm mask sequence is empty")
    for t, m in enumerate(arm_masks):
        if m.any():
            if t == 0:
                raise NoStaticPhaseError("arm visible in the first frame, no static scanning phase")
            return t
    raise NoInteractionPhaseError("arm never appears in the scan")


def frame_points_world(frame: Frame, K: CameraIntrinsics, mask: np.ndarray | None = None) -> np.ndarray:
    return frame.pose.apply(reproject_depth(frame.depth, K, mask))


def fuse_initial_cloud(dataset: ScanDataset, static_end: int, voxel_size: float) -> PointCloud:
    if static_end < 1:
        raise InvalidParameterError("static phase must contain at least one frame")
    K = dataset.intrinsics
    chunks = [frame_points_world(fr, K) for fr in dataset.frames[:static_end]]
    pts = np.concatenate(chunks) if chunks else np.zeros((0, 3))
    return PointCloud(voxel_downsample(pts, voxel_size), "world")


def moving_mask(
    frame: Frame,
    pose: RigidTransform,
    K: CameraIntrinsics,
    initial_index: SpatialIndex,
    rho_moving: float,
) -> np.ndarray:
    """Valid pixels whose world point is farther than ``rho_moving`` from the initial cloud."""
    valid = (frame.depth > 0) & np.isfinite(frame.depth)
    out = np.zeros(K.shape, dtype=bool)
    if not valid.any():
        return out
    pts = pose.apply(reproject_depth(frame.depth, K, valid))
    out[valid] = ~initial_index.within(pts, rho_moving)
    return out


def hand_mask(arm_mask: np.ndarray, span_fraction: float) -> np.ndarray:
    """Arm pixels in the topmost ``span_fraction`` of the arm's row span."""
    rows = np.flatnonzero(arm_mask.any(axis=1))
    out = np.zeros_like(arm_mask, dtype=bool)
    if len(rows) == 0:
        return out
    r_min, r_max = int(rows[0]), int(rows[-1])
    # rounding guards against 0.1 * 30 == 3.0000000000000004
    n_rows = math.ceil(round(span_fraction * (r_max - r_min + 1), 9))
    out[r_min : r_min + n_rows] = arm_mask[r_min : r_min + n_rows]
    return out


def candidate_object_mask(
    moving: np.ndarray,
    arm_mask: np.ndarray,
    frame: Frame,
    pose: RigidTransform,
    K: CameraIntrinsics,
    hand: np.ndarray,
    min_area: int,
    q: float = 0.1,
) -> np.ndarray:
    """The large moving blob whose 3D points lie closest to the hand.

    Ties on distance go to the blob met first in raster order.
    """
    empty = np.zeros(K.shape, dtype=bool)
    if not hand.any():
        return empty
    remainder = moving & ~arm_mask
    labels, blobs = find_blobs(remainder)
    survivors = [b for b in blobs if b.area >= min_area]
    if not survivors:
        return empty
    hand_pts = pose.apply(reproject_depth(frame.depth, K, hand))
    if len(hand_pts) == 0:
        return empty
    hand_index = build_index(hand_pts)

    depth = frame.depth
    best_label, best_dist = 0, math.inf
    for blob in survivors:
        pts = pose.apply(reproject_depth(depth, K, labels == blob.label))
        dist = percentile_set_distance(pts, hand_index, q)
        if dist < best_dist:
            best_label, best_dist = blob.label, dist
    if best_label == 0:
        return empty
    return labels == best_label


@dataclass
class FrameDiscovery:
    moving: np.ndarray
    hand: np.ndarray
    candidate: np.ndarray


def discover_frame(
    frame: Frame,
    K: CameraIntrinsics,
    initial_index: SpatialIndex,
    rho_moving: float,
    span_fraction: float,
    min_area: int,
    q: float,
) -> FrameDiscovery:
    """All per-frame masks for one frame; pure, so frames can run in parallel."""
    moving = moving_mask(frame, frame.pose, K, initial_index, rho_moving)
    hand = hand_mask(frame.arm_mask, span_fraction)
    cand = candidate_object_mask(moving, frame.arm_mask, frame, frame.pose, K, hand, min_area, q)
    return FrameDiscovery(moving=moving, hand=hand, candidate=cand)
