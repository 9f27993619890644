"""Per-object point-cloud reconstruction by frame-to-model ICP chaining.

The object frame is the camera frame of the track's best frame. Each
processed frame is registered against the growing model; accepted frames
contribute their points to voxels the model does not occupy yet.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset_io import Frame, ScanDataset
from .errors import DegenerateGeometryError, InconsistentDatasetError
from .geometry import (
    CameraIntrinsics,
    IcpParams,
    PointCloud,
    RigidTransform,
    build_index,
    icp_align,
    reproject_depth,
    voxel_keys,
    is_degenerate,
)
from .selection import MaskTrack

ACCEPT_RESIDUAL_VOXELS = 3.0


@dataclass(eq=False)
class ObjectReconstruction:
    object_id: int
    best_frame: int
    model: PointCloud
    poses: dict[int, RigidTransform] = field(default_factory=dict)  # object frame -> camera frame at t
    residuals: dict[int, float] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)


def extract_object_points(frame: Frame, mask: np.ndarray, K: CameraIntrinsics) -> PointCloud:
    return PointCloud(reproject_depth(frame.depth, K, mask), "camera")


class _Model:
    """Raw points plus the set of voxels they occupy.

    Merged points are kept only where they land in voxels the model does
    not occupy yet, so re-observed surface is never duplicated.
    """

    def __init__(self, points: np.ndarray, voxel_size: float):
        self.voxel_size = voxel_size
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.occupied = set(map(tuple, voxel_keys(self.points, voxel_size).tolist()))
        self.index = build_index(self.points)

    def merge(self, points: np.ndarray) -> None:
        keys = voxel_keys(points, self.voxel_size).tolist()
        keep = [i for i, k in enumerate(map(tuple, keys)) if k not in self.occupied]
        if not keep:
            return
        self.occupied.update(tuple(keys[i]) for i in keep)
        self.points = np.concatenate([self.points, points[keep]])
        self.index = build_index(self.points)


def chain_icp_reconstruct(
    track: MaskTrack,
    dataset: ScanDataset,
    params: IcpParams | None = None,
    stride: int = 5,
    voxel_size: float = 0.005,
) -> ObjectReconstruction:
    params = params or IcpParams()
    K = dataset.intrinsics
    b = track.best_frame
    seed = extract_object_points(dataset.frames[b], track.masks[b], K).points
    if is_degenerate(seed):
        raise DegenerateGeometryError(f"object {track.object_id}: best frame {b} has degenerate geometry")
    model = _Model(seed, voxel_size)
    recon = ObjectReconstruction(object_id=track.object_id, best_frame=b, model=PointCloud(model.points, "object"))
    recon.poses[b] = RigidTransform.identity()
    recon.residuals[b] = 0.0
    gate = ACCEPT_RESIDUAL_VOXELS * voxel_size
    n = len(track)

    for direction in (1, -1):
        pose = RigidTransform.identity()
        prev_centroid = seed.mean(axis=0)
        t = b + direction * stride
        while 0 <= t < n:
            mask = track.masks[t]
            if not mask.any():
                t += direction * stride
                continue
            pts = extract_object_points(dataset.frames[t], mask, K).points
            if is_degenerate(pts):
                recon.skipped.append(t)
                t += direction * stride
                continue
            # previous rotation, translation re-centred on this frame's points
            guess = pose.inverse()
            trans = prev_centroid - guess.rotation @ pts.mean(axis=0)
            init = RigidTransform(guess.rotation, trans, validate=False)
            try:
                cam_to_obj, residual = icp_align(pts, model.index, params, init)
            except DegenerateGeometryError:
                recon.skipped.append(t)
                t += direction * stride
                continue
            if residual < gate:
                pose = cam_to_obj.inverse()
                moved = cam_to_obj.apply(pts)
                prev_centroid = moved.mean(axis=0)
                model.merge(moved)
                recon.poses[t] = pose
                recon.residuals[t] = residual
            else:
                recon.skipped.append(t)
            t += direction * stride

    recon.model = PointCloud(model.points, "object")
    recon.poses = dict(sorted(recon.poses.items()))
    recon.residuals = dict(sorted(recon.residuals.items()))
    recon.skipped.sort()
    return recon


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def write_ply(path: str | os.PathLike, cloud: PointCloud) -> None:
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    lines.extend(f"{x!r} {y!r} {z!r}" for x, y, z in cloud.points.tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_ply(path: str | os.PathLike, frame_id: str = "object") -> PointCloud:
    text = Path(path).read_text(encoding="ascii").splitlines()
    if not text or text[0] != "ply":
        raise InconsistentDatasetError(f"{path}: not a PLY file")
    n = 0
    end = None
    for i, line in enumerate(text):
        if line.startswith("element vertex"):
            n = int(line.split()[2])
        if line == "end_header":
            end = i
            break
    if end is None:
        raise InconsistentDatasetError(f"{path}: missing end_header")
    body = text[end + 1 : end + 1 + n]
    pts = np.array([[float(v) for v in row.split()[:3]] for row in body]).reshape(-1, 3)
    return PointCloud(pts, frame_id)


def poses_to_json(recon: ObjectReconstruction) -> list[dict]:
    return [
        {"frame": t, "pose": p.to_list(), "residual": recon.residuals.get(t)}
        for t, p in recon.poses.items()
    ]


def write_reconstruction(directory: str | os.PathLike, recon: ObjectReconstruction) -> dict[str, str]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    write_ply(root / "model.ply", recon.model)
    doc = {
        "object_id": recon.object_id,
        "best_frame": recon.best_frame,
        "skipped": recon.skipped,
        "poses": poses_to_json(recon),
    }
    (root / "poses.json").write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return {"model": str(root / "model.ply"), "poses": str(root / "poses.json")}


def read_reconstruction(directory: str | os.PathLike) -> ObjectReconstruction:
    root = Path(directory)
    doc = json.loads((root / "poses.json").read_text(encoding="utf-8"))
    recon = ObjectReconstruction(
        object_id=int(doc["object_id"]),
        best_frame=int(doc["best_frame"]),
        model=read_ply(root / "model.ply"),
        skipped=list(doc.get("skipped", [])),
    )
    for entry in doc["poses"]:
        t = int(entry["frame"])
        recon.poses[t] = RigidTransform.from_list(entry["pose"])
        if entry.get("residual") is not None:
            recon.residuals[t] = float(entry["residual"])
    return recon
