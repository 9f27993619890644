"""Synthetic tabletop RGB-D scans with scripted pick-up maneuvers.

Frames are ray cast analytically against a ground plane, boxes, spheres
and a capsule standing in for the user's arm. Depth is z-depth. The arm
runs from a point just below the bottom image edge to the centre of the
held object, so the top of the arm mask sits next to the object the way a
hand would in an egocentric recording.

Scenario files are JSON::

    {"seed": 0,
     "intrinsics": {"fx": .., "fy": .., "cx": .., "cy": .., "width": .., "height": ..},
     "scene": {"plane": {"height": 0.0, "extent": 0.6},
               "objects": [{"type": "box", "size": [w, d, h],
                            "position": [x, y, z], "rotation_deg": [rx, ry, rz]}, ...],
               "arm": {"radius": 0.012, "length": 0.6}},
     "script": {"fps": 60, "frame_count": N, "static_phase_frames": S,
                "depth_noise_sigma": 0.0, "min_visible_area": 100,
                "camera": {"orbit": {...}} | {"poses": [[12 numbers], ...]},
                "events": [{"object_id": k, "grasp_frame": g, "release_frame": r,
                            "waypoints": [{"frame": f, "position": [..],
                                           "rotation_deg": [..]}, ...]}]}}

``rotation_deg`` holds extrinsic x-y-z Euler angles in degrees.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .dataset_io import Frame, GroundTruth, GroundTruthObject, ScanDataset, intrinsics_from_dict
from .errors import InvalidScenarioError
from .geometry import CameraIntrinsics, PointCloud, RigidTransform

DEFAULT_INTRINSICS = CameraIntrinsics(fx=200.0, fy=200.0, cx=96.0, cy=128.0, width=192, height=256)
DEFAULT_FPS = 60.0

# arm anchor in normalised image coordinates (u / width, v / height) and its z-depth
ARM_ANCHOR_UV = (0.62, 1.12)
ARM_ANCHOR_DEPTH = 0.28

SURFACE_SPACING = 0.002
CONTACT_TOL = 1e-6


# --------------------------------------------------------------------------
# scene description
# --------------------------------------------------------------------------


@dataclass
class Primitive:
    kind: str  # "box" or "sphere"
    size: tuple[float, ...]  # (w, d, h) for boxes, (r,) for spheres
    pose: RigidTransform  # body frame -> world, body origin at the centre

    @property
    def bottom_offset(self) -> float:
        """Distance from centre to the lowest point when upright."""
        return self.size[2] / 2 if self.kind == "box" else self.size[0]

    @property
    def footprint_radius(self) -> float:
        if self.kind == "box":
            return 0.5 * math.hypot(self.size[0], self.size[1])
        return self.size[0]


@dataclass
class SceneSpec:
    plane_height: float
    plane_extent: float
    objects: list[Primitive]
    arm_radius: float = 0.012
    arm_length: float = 0.6


@dataclass
class Waypoint:
    frame: int
    pose: RigidTransform


@dataclass
class ScriptEvent:
    object_id: int
    grasp_frame: int
    release_frame: int
    waypoints: list[Waypoint] = field(default_factory=list)


@dataclass
class ScanScript:
    frame_count: int
    static_phase_frames: int
    camera_poses: list[RigidTransform]
    events: list[ScriptEvent]
    depth_noise_sigma: float = 0.0
    fps: float = DEFAULT_FPS
    min_visible_area: int = 0


@dataclass
class Scenario:
    scene: SceneSpec
    script: ScanScript
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    seed: int = 0


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


def pose_from_euler(position, rotation_deg) -> RigidTransform:
    rot = Rotation.from_euler("xyz", rotation_deg, degrees=True).as_matrix()
    return RigidTransform(_clean_rotation(rot), position)


def _clean_rotation(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    return u @ vt


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera-to-world pose for a camera at ``position`` looking at ``target``."""
    pos = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - pos
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return RigidTransform(_clean_rotation(np.column_stack([right, down, forward])), pos)


def orbit_trajectory(
    frame_count: int,
    target=(0.0, 0.0, 0.02),
    distance: float = 0.55,
    elevation_deg: float = 50.0,
    azimuth_deg: float = 0.0,
    amplitude_deg: float = 15.0,
    period_frames: int = 90,
) -> list[RigidTransform]:
    """Camera swaying sinusoidally in azimuth around ``target``."""
    poses = []
    el = math.radians(elevation_deg)
    for t in range(frame_count):
        az = math.radians(azimuth_deg + amplitude_deg * math.sin(2 * math.pi * t / period_frames))
        offset = distance * np.array([math.cos(el) * math.sin(az), -math.cos(el) * math.cos(az), math.sin(el)])
        poses.append(look_at(np.asarray(target) + offset, target))
    return poses


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvalidScenarioError(message)


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    try:
        K = intrinsics_from_dict(doc["intrinsics"]) if "intrinsics" in doc else DEFAULT_INTRINSICS
        sc = doc["scene"]
        plane = sc.get("plane", {})
        objects = []
        for i, o in enumerate(sc["objects"]):
            kind = o.get("type", "box")
            _require(kind in ("box", "sphere"), f"object {i}: unknown primitive type {kind!r}")
            size = tuple(float(s) for s in (o["size"] if kind == "box" else [o["radius"]]))
            _require(len(size) == (3 if kind == "box" else 1), f"object {i}: bad size")
            _require(all(s > 0 for s in size), f"object {i}: sizes must be positive")
            objects.append(Primitive(kind, size, pose_from_euler(o["position"], o.get("rotation_deg", [0, 0, 0]))))
        arm = sc.get("arm", {})
        scene = SceneSpec(
            plane_height=float(plane.get("height", 0.0)),
            plane_extent=float(plane.get("extent", 0.6)),
            objects=objects,
            arm_radius=float(arm.get("radius", 0.012)),
            arm_length=float(arm.get("length", 0.6)),
        )
        sp = doc["script"]
        n = int(sp["frame_count"])
        cam = sp.get("camera", {"orbit": {}})
        if "poses" in cam:
            cam_poses = [RigidTransform.from_list(p) for p in cam["poses"]]
        else:
            orbit = dict(cam.get("orbit", {}))
            orbit.setdefault("period_frames", int(sp["static_phase_frames"]))
            cam_poses = orbit_trajectory(n, **orbit)
        events = []
        for e in sp.get("events", []):
            wps = [
                Waypoint(int(w["frame"]), pose_from_euler(w["position"], w.get("rotation_deg", [0, 0, 0])))
                for w in e.get("waypoints", [])
            ]
            events.append(ScriptEvent(int(e["object_id"]), int(e["grasp_frame"]), int(e["release_frame"]), wps))
        script = ScanScript(
            frame_count=n,
            static_phase_frames=int(sp["static_phase_frames"]),
            camera_poses=cam_poses,
            events=events,
            depth_noise_sigma=float(sp.get("depth_noise_sigma", 0.0)),
            fps=float(sp.get("fps", DEFAULT_FPS)),
            min_visible_area=int(sp.get("min_visible_area", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidScenarioError(f"scenario is missing or mistypes field {exc}") from exc
    scenario = Scenario(scene=scene, script=script, intrinsics=K, seed=int(doc.get("seed", 0)))
    validate_scenario(scenario)
    return scenario


def load_scenario(path: str | os.PathLike) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise InvalidScenarioError(f"scenario file {p} does not exist")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidScenarioError(f"{p}: invalid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def validate_scenario(scenario: Scenario) -> None:
    scene, script = scenario.scene, scenario.script
    n = script.frame_count
    _require(n >= 1, "frame_count must be positive")
    _require(len(script.camera_poses) == n, f"{len(script.camera_poses)} camera poses for {n} frames")
    _require(1 <= script.static_phase_frames <= n, "static phase must cover at least one frame")
    _require(script.depth_noise_sigma >= 0, "depth noise must be non-negative")
    _require(scene.arm_radius > 0 and scene.arm_length > 0, "arm capsule must have positive size")
    for i, obj in enumerate(scene.objects):
        _require(
            _rests_on_plane(obj, scene.plane_height),
            f"object {i} does not rest on the ground plane",
        )
    for i in range(len(scene.objects)):
        for j in range(i + 1, len(scene.objects)):
            _require(
                not _footprints_overlap(scene.objects[i], scene.objects[j]),
                f"objects {i} and {j} overlap",
            )
    events = sorted(enumerate(script.events), key=lambda ie: ie[1].grasp_frame)
    for idx, ev in events:
        _require(0 <= ev.object_id < len(scene.objects), f"event {idx}: unknown object {ev.object_id}")
        _require(ev.grasp_frame < ev.release_frame, f"event {idx}: grasp must precede release")
        _require(ev.grasp_frame >= script.static_phase_frames, f"event {idx} starts inside the static phase")
        _require(ev.release_frame < n, f"event {idx} ends after the last frame")
        frames = [w.frame for w in ev.waypoints]
        _require(frames == sorted(frames), f"event {idx}: waypoints out of order")
        _require(
            all(ev.grasp_frame < f <= ev.release_frame for f in frames),
            f"event {idx}: waypoints must lie in ({ev.grasp_frame}, {ev.release_frame}]",
        )
        if ev.waypoints:
            _require(
                _rests_on_plane(_with_pose(scene.objects[ev.object_id], ev.waypoints[-1].pose), scene.plane_height),
                f"event {idx}: object is not set down on the plane",
            )
    for (ia, a), (ib, b) in zip(events, events[1:]):
        _require(
            a.release_frame < b.grasp_frame,
            f"events {ia} and {ib} overlap: frames [{a.grasp_frame}, {a.release_frame}] and [{b.grasp_frame}, {b.release_frame}]",
        )


def _with_pose(obj: Primitive, pose: RigidTransform) -> Primitive:
    return Primitive(obj.kind, obj.size, pose)


def _rests_on_plane(obj: Primitive, plane_height: float) -> bool:
    if obj.kind == "sphere":
        return abs(obj.pose.translation[2] - obj.size[0] - plane_height) < CONTACT_TOL
    corners = _box_corners(obj)
    return abs(corners[:, 2].min() - plane_height) < CONTACT_TOL


def _box_corners(obj: Primitive) -> np.ndarray:
    half = np.asarray(obj.size) / 2
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    return obj.pose.apply(signs * half)


def _footprints_overlap(a: Primitive, b: Primitive) -> bool:
    # conservative: bounding circles in the table plane
    d = np.linalg.norm(a.pose.translation[:2] - b.pose.translation[:2])
    return d < a.footprint_radius + b.footprint_radius


# --------------------------------------------------------------------------
# object motion
# --------------------------------------------------------------------------


def _interpolate(p0: RigidTransform, p1: RigidTransform, f0: int, f1: int, frames: np.ndarray) -> list[RigidTransform]:
    if f1 == f0:
        return [p1 for _ in frames]
    alpha = (frames - f0) / (f1 - f0)
    rots = Rotation.from_matrix(np.stack([p0.rotation, p1.rotation]))
    slerp = Slerp([0.0, 1.0], rots)
    mats = slerp(alpha).as_matrix()
    trans = (1 - alpha)[:, None] * p0.translation + alpha[:, None] * p1.translation
    return [RigidTransform(_clean_rotation(m), tr, validate=False) for m, tr in zip(mats, trans)]


def object_trajectories(scene: SceneSpec, script: ScanScript) -> list[list[RigidTransform]]:
    """Per-object, per-frame body-to-world poses."""
    n = script.frame_count
    out = [[obj.pose] * n for obj in scene.objects]
    for ev in sorted(script.events, key=lambda e: e.grasp_frame):
        traj = out[ev.object_id]
        keys = [Waypoint(ev.grasp_frame, traj[ev.grasp_frame])] + list(ev.waypoints)
        if keys[-1].frame < ev.release_frame:
            keys.append(Waypoint(ev.release_frame, keys[-1].pose))
        for k0, k1 in zip(keys, keys[1:]):
            frames = np.arange(k0.frame, k1.frame + 1)
            for t, pose in zip(frames, _interpolate(k0.pose, k1.pose, k0.frame, k1.frame, frames)):
                traj[int(t)] = pose
        final = keys[-1].pose
        for t in range(ev.release_frame, n):
            traj[t] = final
    return out


def arm_segment(
    object_center: np.ndarray, camera_pose: RigidTransform, K: CameraIntrinsics, length: float
) -> tuple[np.ndarray, np.ndarray]:
    """Capsule axis from the object centre toward an anchor below the image."""
    u = ARM_ANCHOR_UV[0] * K.width
    v = ARM_ANCHOR_UV[1] * K.height
    d = ARM_ANCHOR_DEPTH
    anchor_cam = np.array([(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d])
    anchor = camera_pose.apply(anchor_cam)
    direction = anchor - object_center
    dist = float(np.linalg.norm(direction))
    return object_center, object_center + direction / dist * min(length, dist)


# --------------------------------------------------------------------------
# ray casting
# --------------------------------------------------------------------------


def _camera_rays(K: CameraIntrinsics) -> np.ndarray:
    v, u = np.mgrid[0 : K.height, 0 : K.width]
    return np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones(u.shape)], axis=-1).reshape(-1, 3)


def _hit_plane(o, d, height, extent):
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (height - o[2]) / d[:, 2]
    hit = o + s[:, None] * d
    ok = (s > 0) & (np.abs(hit[:, 0]) <= extent) & (np.abs(hit[:, 1]) <= extent)
    return np.where(ok, s, np.inf)


def _hit_box(o, d, obj: Primitive):
    rot, center = obj.pose.rotation, obj.pose.translation
    half = np.asarray(obj.size) / 2
    out = np.full(len(d), np.inf)
    # only rays through the bounding sphere need the slab test
    cand = np.flatnonzero(np.isfinite(_hit_sphere(o, d, center, float(np.linalg.norm(half)) * 1.0001, inside_ok=True)))
    if len(cand) == 0:
        return out
    lo = rot.T @ (o - center)
    ld = d[cand] @ rot  # rows are R^T d
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - lo) / ld
        t2 = (half - lo) / ld
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    t_near = np.maximum(np.maximum(near[:, 0], near[:, 1]), near[:, 2])
    t_far = np.minimum(np.minimum(far[:, 0], far[:, 1]), far[:, 2])
    ok = (t_near <= t_far) & (t_near > 0)
    out[cand] = np.where(ok, t_near, np.inf)
    return out


def _hit_sphere(o, d, center, radius, inside_ok: bool = False):
    """Entry parameter of the ray into a ball; ``inside_ok`` also accepts the exit point."""
    oc = o - center
    a = np.einsum("ij,ij->i", d, d)
    b = 2 * d @ oc
    c = oc @ oc - radius * radius
    disc = b * b - 4 * a * c
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
        s = (-b - root) / (2 * a)
        if inside_ok:
            s = np.where(s > 0, s, (-b + root) / (2 * a))
    return np.where((disc >= 0) & (s > 0), s, np.inf)


def _hit_capsule(o, d, p0, p1, radius):
    ba = p1 - p0
    oa = o - p0
    baba = ba @ ba
    bard = d @ ba
    baoa = ba @ oa
    dd = np.einsum("ij,ij->i", d, d)
    a = baba * dd - bard * bard
    b = baba * (d @ oa) - baoa * bard
    c = baba * (oa @ oa) - baoa * baoa - radius * radius * baba
    h = b * b - a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (-b - np.sqrt(h)) / a
    y = baoa + s * bard
    body = np.where((h >= 0) & (a > 1e-15) & (s > 0) & (y > 0) & (y < baba), s, np.inf)
    return np.minimum(body, np.minimum(_hit_sphere(o, d, p0, radius), _hit_sphere(o, d, p1, radius)))


@dataclass
class RenderedFrame:
    depth: np.ndarray  # float32 z-depth, 0 on misses
    labels: np.ndarray  # uint8, k + 1 where object k is the nearest hit
    arm_mask: np.ndarray


def render_frame(
    scene: SceneSpec,
    object_poses: list[RigidTransform],
    camera_pose: RigidTransform,
    K: CameraIntrinsics,
    noise_sigma: float = 0.0,
    arm: tuple[np.ndarray, np.ndarray] | None = None,
    rng: np.random.Generator | None = None,
) -> RenderedFrame:
    rays_cam = _camera_rays(K)
    d = rays_cam @ camera_pose.rotation.T
    o = camera_pose.translation
    # z-depth equals the ray parameter because the camera-frame ray has unit z
    hits = [_hit_plane(o, d, scene.plane_height, scene.plane_extent)]
    for obj, pose in zip(scene.objects, object_poses):
        posed = _with_pose(obj, pose)
        hits.append(_hit_box(o, d, posed) if obj.kind == "box" else _hit_sphere(o, d, pose.translation, obj.size[0]))
    if arm is not None:
        hits.append(_hit_capsule(o, d, arm[0], arm[1], scene.arm_radius))
    stack = np.stack(hits)
    nearest = np.argmin(stack, axis=0)
    depth = stack[nearest, np.arange(stack.shape[1])]
    missed = ~np.isfinite(depth)
    depth = np.where(missed, 0.0, depth)
    if noise_sigma > 0:
        if rng is None:
            raise InvalidScenarioError("a random generator is required for noisy rendering")
        noise = rng.normal(0.0, noise_sigma, size=depth.shape)
        depth = np.where(missed, 0.0, np.maximum(depth + noise, 0.0))
    n_obj = len(scene.objects)
    labels = np.where(missed | (nearest == 0) | (nearest > n_obj), 0, nearest).astype(np.uint8)
    arm_mask = (~missed) & (nearest == n_obj + 1) if arm is not None else np.zeros(depth.shape, dtype=bool)
    shape = K.shape
    return RenderedFrame(
        depth=depth.astype(np.float32).reshape(shape),
        labels=labels.reshape(shape),
        arm_mask=arm_mask.reshape(shape),
    )


# --------------------------------------------------------------------------
# ground-truth surfaces
# --------------------------------------------------------------------------


def sample_surface(obj: Primitive, spacing: float = SURFACE_SPACING) -> np.ndarray:
    """Regular samples on the primitive's surface in its body frame."""
    if obj.kind == "sphere":
        r = obj.size[0]
        n = max(16, int(4 * math.pi * r * r / spacing**2))
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        theta = math.pi * (1 + 5**0.5) * i
        return r * np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    half = np.asarray(obj.size) / 2
    faces = []
    for axis in range(3):
        a1, a2 = [k for k in range(3) if k != axis]
        n1 = max(2, int(round(obj.size[a1] / spacing)) + 1)
        n2 = max(2, int(round(obj.size[a2] / spacing)) + 1)
        g1, g2 = np.meshgrid(np.linspace(-half[a1], half[a1], n1), np.linspace(-half[a2], half[a2], n2), indexing="ij")
        for sign in (-1.0, 1.0):
            face = np.zeros((g1.size, 3))
            face[:, axis] = sign * half[axis]
            face[:, a1] = g1.ravel()
            face[:, a2] = g2.ravel()
            faces.append(face)
    return np.concatenate(faces)


# --------------------------------------------------------------------------
# scan generation
# --------------------------------------------------------------------------


def generate_scan(scenario: Scenario) -> tuple[ScanDataset, GroundTruth]:
    validate_scenario(scenario)
    scene, script, K = scenario.scene, scenario.script, scenario.intrinsics
    n = script.frame_count
    trajectories = object_trajectories(scene, script)
    held = [None] * n
    for ev in script.events:
        for t in range(ev.grasp_frame, ev.release_frame + 1):
            held[t] = ev.object_id
    rng = np.random.default_rng(scenario.seed)
    frames, labels = [], []
    for t in range(n):
        poses = [traj[t] for traj in trajectories]
        cam = script.camera_poses[t]
        arm = None
        if held[t] is not None:
            arm = arm_segment(poses[held[t]].translation, cam, K, scene.arm_length)
        r = render_frame(scene, poses, cam, K, script.depth_noise_sigma, arm, rng)
        frames.append(Frame(depth=r.depth, arm_mask=r.arm_mask, pose=cam, timestamp=t / script.fps))
        labels.append(r.labels)
    labels_arr = np.stack(labels)

    if script.min_visible_area > 0:
        for ev in script.events:
            areas = (labels_arr[ev.grasp_frame : ev.release_frame + 1] == ev.object_id + 1).sum(axis=(1, 2))
            if areas.min() < script.min_visible_area:
                worst = ev.grasp_frame + int(np.argmin(areas))
                raise InvalidScenarioError(
                    f"object {ev.object_id} shows only {int(areas.min())} px at frame {worst} "
                    f"(needs {script.min_visible_area})"
                )

    intervals = {ev.object_id: (ev.grasp_frame, ev.release_frame) for ev in script.events}
    gt_objects = []
    for k, obj in enumerate(scene.objects):
        body = sample_surface(obj)
        gt_objects.append(
            GroundTruthObject(
                object_id=k,
                interval=intervals.get(k),
                poses=list(trajectories[k]),
                surface=PointCloud(trajectories[k][0].apply(body), "world"),
                shape={"type": obj.kind, "size": list(obj.size)},
            )
        )
    metadata = {
        "generator": "interactscan.simulator",
        "seed": scenario.seed,
        "depth_noise_sigma": script.depth_noise_sigma,
        "fps": script.fps,
        "static_phase_frames": script.static_phase_frames,
    }
    dataset = ScanDataset(intrinsics=K, frames=frames, metadata=metadata)
    dataset.validate()
    return dataset, GroundTruth(objects=gt_objects, labels=labels_arr)


# --------------------------------------------------------------------------
# default scenes
# --------------------------------------------------------------------------

SLOTS_X = (-0.12, 0.0, 0.12)
SLOTS_Y = (-0.065, 0.065)
LIFT_HEIGHT = 0.15


def default_scenario_dict(
    seed: int = 0,
    n_objects: int = 3,
    depth_noise_sigma: float = 0.0,
    static_phase_frames: int = 90,
    event_frames: int = 150,
    gap_frames: int = 40,
    yaw_step_deg: float = 45.0,
) -> dict[str, Any]:
    """Tabletop scene with ``n_objects`` boxes, each picked up, turned and put down once.

    Boxes are lower than the default moving threshold and narrower than
    twice of it, so resting boxes never read as displaced geometry. The
    carried box turns by ``yaw_step_deg`` between consecutive carry
    waypoints (about 1.5 degrees per frame at the defaults).
    """
    rng = np.random.default_rng(seed)
    slots = [(x, y) for y in SLOTS_Y for x in SLOTS_X]
    order = rng.permutation(len(slots))
    occupied = [int(s) for s in order[:n_objects]]
    objects = []
    for k in range(n_objects):
        w = float(rng.uniform(0.065, 0.085))
        dpt = float(rng.uniform(0.040, 0.052))
        h = float(rng.uniform(0.034, 0.040))
        sx, sy = slots[occupied[k]]
        jitter = rng.uniform(-0.006, 0.006, size=2)
        objects.append(
            {
                "type": "box",
                "size": [w, dpt, h],
                "position": [sx + float(jitter[0]), sy + float(jitter[1]), h / 2],
                "rotation_deg": [0.0, 0.0, float(rng.uniform(-30, 30))],
            }
        )

    events = []
    frame = static_phase_frames
    positions = [list(o["position"]) for o in objects]
    yaws = [o["rotation_deg"][2] for o in objects]
    lift = 8
    for k in rng.permutation(n_objects):
        k = int(k)
        g = frame
        r = g + event_frames
        free = [s for s in range(len(slots)) if s not in occupied]
        dest = free[int(rng.integers(len(free)))]
        occupied[k] = dest
        x0, y0, z0 = positions[k]
        dx, dy = slots[dest]
        h = objects[k]["size"][2]
        yaw = yaws[k]
        carry_start, carry_end = g + lift, r - lift - 2
        n_mid = 4
        wps = [{"frame": carry_start, "position": [x0, y0, LIFT_HEIGHT], "rotation_deg": [0.0, 0.0, yaw]}]
        for i in range(1, n_mid + 1):
            a = i / (n_mid + 1)
            f = int(round(carry_start + a * (carry_end - carry_start)))
            px = (1 - a) * x0 + a * dx
            py = (1 - a) * y0 + a * dy - 0.04 * math.sin(math.pi * a)
            tilt = 20.0 * math.sin(math.pi * a)
            wps.append(
                {
                    "frame": f,
                    "position": [px, py, LIFT_HEIGHT + 0.02 * math.sin(math.pi * a)],
                    "rotation_deg": [tilt, 0.0, yaw + yaw_step_deg * i],
                }
            )
        final_yaw = yaw + yaw_step_deg * (n_mid + 1)
        wps.append({"frame": carry_end, "position": [dx, dy, LIFT_HEIGHT], "rotation_deg": [0.0, 0.0, final_yaw]})
        wps.append({"frame": r - 2, "position": [dx, dy, h / 2], "rotation_deg": [0.0, 0.0, final_yaw]})
        events.append({"object_id": k, "grasp_frame": g, "release_frame": r, "waypoints": wps})
        positions[k] = [dx, dy, h / 2]
        yaws[k] = final_yaw
        frame = r + gap_frames

    return {
        "seed": seed,
        "intrinsics": {"fx": 200.0, "fy": 200.0, "cx": 96.0, "cy": 128.0, "width": 192, "height": 256},
        "scene": {
            "plane": {"height": 0.0, "extent": 0.6},
            "objects": objects,
            "arm": {"radius": 0.012, "length": 0.6},
        },
        "script": {
            "fps": DEFAULT_FPS,
            "frame_count": frame - gap_frames + 30,
            "static_phase_frames": static_phase_frames,
            "depth_noise_sigma": depth_noise_sigma,
            "min_visible_area": 100,
            "camera": {"orbit": {"period_frames": static_phase_frames}},
            "events": events,
        },
    }


def default_scenario(seed: int = 0, **kwargs) -> Scenario:
    return scenario_from_dict(default_scenario_dict(seed, **kwargs))


def static_scenario_dict(seed: int = 0, frame_count: int = 180, **kwargs) -> dict[str, Any]:
    """The default scene with every event removed."""
    doc = copy.deepcopy(default_scenario_dict(seed, **kwargs))
    doc["script"]["events"] = []
    doc["script"]["frame_count"] = frame_count
    return doc
