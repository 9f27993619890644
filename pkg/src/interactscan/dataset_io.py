"""On-disk formats for scans, ground truth and pipeline configuration.

Directory layout::

    manifest.json          intrinsics, frame names, poses (12 numbers), timestamps
    depth/000000.f32       little-endian float32, row-major, H*W values
    arm_mask/000000.pgm    binary PGM (P5, maxval 255)
    gt/objects.json        optional ground truth
    gt/labels/000000.pgm   per-pixel object label (0 = none, k+1 = object k)
    gt/surface_000.f64     little-endian float64 (N, 3) surface samples

Python's ``json`` writes floats with ``repr`` so every number round-trips.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    DatasetNotFoundError,
    DatasetWriteError,
    InconsistentDatasetError,
    InvalidConfigError,
    InvalidPoseError,
)
from .geometry import CameraIntrinsics, IcpParams, PointCloud, RigidTransform

FORMAT_VERSION = 1
DEPTH_DTYPE = np.dtype("<f4")
SURFACE_DTYPE = np.dtype("<f8")


@dataclass(eq=False)
class Frame:
    depth: np.ndarray  # (H, W) float32 meters, 0 = invalid
    arm_mask: np.ndarray  # (H, W) bool
    pose: RigidTransform  # camera frame at t -> world frame F0
    timestamp: float

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.depth.dtype == other.depth.dtype
            and np.array_equal(self.depth.view(np.uint32), other.depth.view(np.uint32))
            and np.array_equal(self.arm_mask, other.arm_mask)
            and self.pose == other.pose
            and self.timestamp == other.timestamp
        )


@dataclass(eq=False)
class ScanDataset:
    intrinsics: CameraIntrinsics
    frames: list[Frame]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScanDataset):
            return NotImplemented
        return (
            self.intrinsics == other.intrinsics
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
            and self.metadata == other.metadata
        )

    def validate(self) -> None:
        K = self.intrinsics
        prev_ts = -math.inf
        for i, fr in enumerate(self.frames):
            if fr.depth.shape != K.shape or fr.arm_mask.shape != K.shape:
                raise InconsistentDatasetError(
                    f"frame {i}: raster shape {fr.depth.shape} does not match {K.width}x{K.height}"
                )
            if fr.depth.dtype != np.float32 or fr.arm_mask.dtype != np.bool_:
                raise InconsistentDatasetError(f"frame {i}: unexpected raster dtypes")
            if np.any(fr.depth < 0) or not np.all(np.isfinite(fr.depth)):
                raise InconsistentDatasetError(f"frame {i}: depth must be finite and >= 0")
            if not fr.timestamp > prev_ts:
                raise InconsistentDatasetError(f"frame {i}: timestamps must strictly increase")
            prev_ts = fr.timestamp


@dataclass(eq=False)
class GroundTruthObject:
    object_id: int
    interval: tuple[int, int] | None  # inclusive grasp/release frames, None if never moved
    poses: list[RigidTransform]  # per frame, object body frame -> world
    surface: PointCloud  # world frame, object at its frame-0 pose
    shape: dict[str, Any] = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroundTruthObject):
            return NotImplemented
        return (
            self.object_id == other.object_id
            and self.interval == other.interval
            and self.poses == other.poses
            and np.array_equal(self.surface.points, other.surface.points)
            and self.shape == other.shape
        )


@dataclass(eq=False)
class GroundTruth:
    objects: list[GroundTruthObject]
    labels: np.ndarray  # (T, H, W) uint8, 0 = no object, k+1 = object index k

    def mask(self, object_index: int, frame: int) -> np.ndarray:
        return self.labels[frame] == object_index + 1

    def masks(self, object_index: int) -> np.ndarray:
        return self.labels == object_index + 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return (
            len(self.objects) == len(other.objects)
            and all(a == b for a, b in zip(self.objects, other.objects))
            and np.array_equal(self.labels, other.labels)
        )


# --------------------------------------------------------------------------
# PGM
# --------------------------------------------------------------------------


def write_pgm(path: Path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.dtype == np.bool_:
        img = img.astype(np.uint8) * 255
    img = img.astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InconsistentDatasetError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    if tokens[0] != b"P5" or tokens[3] != b"255":
        raise InconsistentDatasetError(f"{path}: expected binary PGM with maxval 255")
    w, h = int(tokens[1]), int(tokens[2])
    body = data[pos:]
    if len(body) != w * h:
        raise InconsistentDatasetError(f"{path}: expected {w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def read_mask(path: Path, shape: tuple[int, int]) -> np.ndarray:
    img = read_pgm(path)
    if img.shape != shape:
        raise InconsistentDatasetError(f"{path}: mask is {img.shape}, expected {shape}")
    return img > 0


# --------------------------------------------------------------------------
# scans
# --------------------------------------------------------------------------


def _frame_name(i: int) -> str:
    return f"{i:06d}"


def _load_json(path: Path) -> Any:
    if not path.is_file():
        raise DatasetNotFoundError(f"missing file {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InconsistentDatasetError(f"{path}: invalid JSON ({exc})") from exc


def intrinsics_to_dict(K: CameraIntrinsics) -> dict[str, Any]:
    return dataclasses.asdict(K)


def intrinsics_from_dict(d: dict[str, Any]) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(
            fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
            width=int(d["width"]), height=int(d["height"]),
        )
    except KeyError as exc:
        raise InconsistentDatasetError(f"intrinsics missing {exc}") from exc


def load_scan(path: str | os.PathLike) -> ScanDataset:
    root = Path(path)
    if not root.is_dir():
        raise DatasetNotFoundError(f"dataset directory {root} does not exist")
    manifest = _load_json(root / "manifest.json")
    try:
        K = intrinsics_from_dict(manifest["intrinsics"])
        names = list(manifest["frames"])
        poses = list(manifest["poses"])
        stamps = list(manifest["timestamps"])
    except (KeyError, TypeError) as exc:
        raise InconsistentDatasetError(f"manifest missing field {exc}") from exc
    if not (len(names) == len(poses) == len(stamps)):
        raise InconsistentDatasetError(
            f"manifest lists {len(names)} frames, {len(poses)} poses, {len(stamps)} timestamps"
        )
    n_pixels = K.width * K.height
    frames = []
    for i, name in enumerate(names):
        depth_path = root / "depth" / f"{name}.f32"
        if not depth_path.is_file():
            raise DatasetNotFoundError(f"missing depth raster {depth_path}")
        raw = depth_path.read_bytes()
        if len(raw) != n_pixels * DEPTH_DTYPE.itemsize:
            raise InconsistentDatasetError(
                f"{depth_path}: {len(raw)} bytes, expected {n_pixels * DEPTH_DTYPE.itemsize}"
            )
        depth = np.frombuffer(raw, dtype=DEPTH_DTYPE).reshape(K.shape).astype(np.float32)
        mask_path = root / "arm_mask" / f"{name}.pgm"
        if not mask_path.is_file():
            raise DatasetNotFoundError(f"missing arm mask {mask_path}")
        arm = read_mask(mask_path, K.shape)
        try:
            pose = RigidTransform.from_list(poses[i])
        except InvalidPoseError as exc:
            raise InvalidPoseError(f"frame {i}: {exc}") from exc
        frames.append(Frame(depth=depth, arm_mask=arm, pose=pose, timestamp=float(stamps[i])))
    ds = ScanDataset(intrinsics=K, frames=frames, metadata=dict(manifest.get("metadata", {})))
    ds.validate()
    return ds


def save_scan(dataset: ScanDataset, path: str | os.PathLike) -> None:
    root = Path(path)
    try:
        (root / "depth").mkdir(parents=True, exist_ok=True)
        (root / "arm_mask").mkdir(parents=True, exist_ok=True)
        names = []
        for i, fr in enumerate(dataset.frames):
            name = _frame_name(i)
            names.append(name)
            (root / "depth" / f"{name}.f32").write_bytes(np.asarray(fr.depth, dtype=DEPTH_DTYPE).tobytes())
            write_pgm(root / "arm_mask" / f"{name}.pgm", fr.arm_mask)
        manifest = {
            "format_version": FORMAT_VERSION,
            "intrinsics": intrinsics_to_dict(dataset.intrinsics),
            "frames": names,
            "poses": [fr.pose.to_list() for fr in dataset.frames],
            "timestamps": [fr.timestamp for fr in dataset.frames],
            "metadata": dataset.metadata,
        }
        (root / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    except OSError as exc:
        raise DatasetWriteError(f"could not write dataset to {root}: {exc}") from exc


# --------------------------------------------------------------------------
# ground truth
# --------------------------------------------------------------------------


def save_ground_truth(gt: GroundTruth, path: str | os.PathLike) -> None:
    root = Path(path) / "gt"
    try:
        (root / "labels").mkdir(parents=True, exist_ok=True)
        for t, lab in enumerate(gt.labels):
            write_pgm(root / "labels" / f"{_frame_name(t)}.pgm", lab)
        entries = []
        for obj in gt.objects:
            surf_name = f"surface_{obj.object_id:03d}.f64"
            (root / surf_name).write_bytes(np.asarray(obj.surface.points, dtype=SURFACE_DTYPE).tobytes())
            entries.append(
                {
                    "object_id": obj.object_id,
                    "interval": list(obj.interval) if obj.interval is not None else None,
                    "shape": obj.shape,
                    "surface": surf_name,
                    "poses": [p.to_list() for p in obj.poses],
                }
            )
        doc = {"frame_count": int(gt.labels.shape[0]), "objects": entries}
        (root / "objects.json").write_text(json.dumps(doc), encoding="utf-8")
    except OSError as exc:
        raise DatasetWriteError(f"could not write ground truth to {root}: {exc}") from exc


def load_ground_truth(path: str | os.PathLike, shape: tuple[int, int] | None = None) -> GroundTruth:
    root = Path(path) / "gt"
    doc = _load_json(root / "objects.json")
    try:
        return _parse_ground_truth(root, doc, shape)
    except (KeyError, TypeError, IndexError) as exc:
        raise InconsistentDatasetError(f"{root / 'objects.json'}: malformed entry ({exc!r})") from exc


def _parse_ground_truth(root: Path, doc: dict[str, Any], shape: tuple[int, int] | None) -> GroundTruth:
    n = int(doc["frame_count"])
    labels = []
    for t in range(n):
        lab_path = root / "labels" / f"{_frame_name(t)}.pgm"
        if not lab_path.is_file():
            raise DatasetNotFoundError(f"missing ground-truth labels for frame {t}")
        lab = read_pgm(lab_path)
        if shape is not None and lab.shape != shape:
            raise InconsistentDatasetError(f"ground-truth labels for frame {t} have shape {lab.shape}")
        labels.append(lab)
    objects = []
    for entry in doc["objects"]:
        surf_path = root / entry["surface"]
        if not surf_path.is_file():
            raise DatasetNotFoundError(f"missing surface samples {surf_path}")
        pts = np.frombuffer(surf_path.read_bytes(), dtype=SURFACE_DTYPE).reshape(-1, 3).copy()
        interval = entry["interval"]
        if interval is not None:
            interval = (int(interval[0]), int(interval[1]))
            if not (0 <= interval[0] <= interval[1] < n):
                raise InconsistentDatasetError(f"object {entry['object_id']}: interval {interval} outside scan")
        poses = [RigidTransform.from_list(p) for p in entry["poses"]]
        if len(poses) != n:
            raise InconsistentDatasetError(f"object {entry['object_id']}: {len(poses)} poses for {n} frames")
        objects.append(
            GroundTruthObject(
                object_id=int(entry["object_id"]),
                interval=interval,
                poses=poses,
                surface=PointCloud(pts, "world"),
                shape=entry.get("shape", {}),
            )
        )
    stacked = np.stack(labels) if labels else np.zeros((0, 0, 0), dtype=np.uint8)
    return GroundTruth(objects=objects, labels=stacked)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    rho_moving: float = 0.05
    min_blob_area: int = 100
    hand_span_fraction: float = 0.10
    distance_percentile: float = 0.1
    median_window: int = 9
    min_interaction_duration: int = 60
    tau_iou: float = 0.8
    tau_nms: float = 0.5
    icp: IcpParams = field(default_factory=IcpParams)
    voxel_size: float = 0.005
    stride: int = 5

    def __post_init__(self) -> None:
        for name in ("rho_moving", "min_blob_area", "median_window", "min_interaction_duration", "voxel_size", "stride"):
            if not getattr(self, name) > 0:
                raise InvalidConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("hand_span_fraction", "distance_percentile", "tau_iou", "tau_nms"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise InvalidConfigError(f"{name} must lie in (0, 1], got {value}")
        if self.median_window % 2 != 1:
            raise InvalidConfigError(f"median_window must be odd, got {self.median_window}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PipelineConfig:
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        int_keys = {"min_blob_area", "median_window", "min_interaction_duration", "stride"}
        for key in int_keys & set(kwargs):
            if not isinstance(kwargs[key], int) or isinstance(kwargs[key], bool):
                raise InvalidConfigError(f"{key} must be an integer")
        if "icp" in kwargs:
            icp = kwargs["icp"]
            if not isinstance(icp, dict):
                raise InvalidConfigError("icp must be an object")
            icp_fields = {f.name for f in dataclasses.fields(IcpParams)}
            bad = set(icp) - icp_fields
            if bad:
                raise InvalidConfigError(f"unknown icp keys: {sorted(bad)}")
            try:
                kwargs["icp"] = IcpParams(**icp)
            except ValueError as exc:
                raise InvalidConfigError(str(exc)) from exc
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)


def load_config(path: str | os.PathLike) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise DatasetNotFoundError(f"config file {p} does not exist")
    text = p.read_text(encoding="utf-8").strip()
    if not text:
        return PipelineConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{p}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{p}: top level must be an object")
    return PipelineConfig.from_dict(data)


def save_config(config: PipelineConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2), encoding="utf-8")
