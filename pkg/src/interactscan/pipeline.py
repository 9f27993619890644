"""End-to-end orchestration: discovery, interaction detection, tracking, NMS, reconstruction."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset_io import PipelineConfig, ScanDataset
from .discovery import detect_static_phase_end, discover_frame, fuse_initial_cloud
from .errors import DegenerateGeometryError, NoStablePeriodError
from .geometry import PointCloud, build_index
from .interaction import InteractionEvent, detect_interactions, distance_trajectories, median_filter
from .reconstruction import ObjectReconstruction, chain_icp_reconstruct
from .selection import MaskTrack, nms, select_best_frame, track_mask

log = logging.getLogger(__name__)

Tracker = Callable[..., MaskTrack]


@dataclass(eq=False)
class DiscoveryResult:
    static_end: int
    initial_cloud: PointCloud
    moving: np.ndarray  # (T, H, W) bool
    hand: np.ndarray
    candidates: np.ndarray
    d_hi: np.ndarray
    d_ho: np.ndarray
    d_hi_filtered: np.ndarray
    d_ho_filtered: np.ndarray
    events: list[InteractionEvent]
    all_tracks: list[MaskTrack]
    tracks: list[MaskTrack]  # after NMS
    timings: dict[str, float] = field(default_factory=dict)


@dataclass(eq=False)
class DetectedObject:
    track: MaskTrack
    reconstruction: ObjectReconstruction | None


def _timed(timings: dict[str, float], name: str, start: float) -> float:
    now = time.perf_counter()
    timings[name] = timings.get(name, 0.0) + (now - start)
    return now


def run_discovery(
    dataset: ScanDataset,
    config: PipelineConfig,
    threads: int | None = None,
    tracker: Tracker = track_mask,
) -> DiscoveryResult:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    K = dataset.intrinsics
    static_end = detect_static_phase_end([f.arm_mask for f in dataset.frames])
    initial = fuse_initial_cloud(dataset, static_end, config.voxel_size)
    index = build_index(initial)
    t0 = _timed(timings, "initial_fusion", t0)
    log.info("static phase ends at frame %d; initial cloud has %d points", static_end, len(initial))

    def one(frame):
        return discover_frame(
            frame, K, index, config.rho_moving, config.hand_span_fraction,
            config.min_blob_area, config.distance_percentile,
        )

    workers = threads or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_frame = list(pool.map(one, dataset.frames))
    else:
        per_frame = [one(f) for f in dataset.frames]
    moving = np.stack([p.moving for p in per_frame])
    hand = np.stack([p.hand for p in per_frame])
    candidates = np.stack([p.candidate for p in per_frame])
    t0 = _timed(timings, "masks", t0)

    d_hi, d_ho = distance_trajectories(dataset, index, hand, candidates, config.distance_percentile)
    d_hi_f = median_filter(d_hi, config.median_window)
    d_ho_f = median_filter(d_ho, config.median_window)
    events = detect_interactions(d_hi_f, d_ho_f, config.min_interaction_duration)
    t0 = _timed(timings, "interactions", t0)
    log.info("detected %d interactions: %s", len(events), [(e.start, e.end) for e in events])

    arm = np.stack([f.arm_mask for f in dataset.frames])
    tracks = []
    for object_id, event in enumerate(events):
        try:
            best = select_best_frame(event, candidates, config.tau_iou)
        except NoStablePeriodError as exc:
            log.warning("dropping interaction [%d, %d]: %s", event.start, event.end, exc)
            continue
        tracks.append(tracker(candidates[best], best, moving, arm, object_id=object_id, interaction=event))
    survivors = nms(tracks, config.tau_nms)
    _timed(timings, "tracking", t0)
    return DiscoveryResult(
        static_end=static_end,
        initial_cloud=initial,
        moving=moving,
        hand=hand,
        candidates=candidates,
        d_hi=d_hi,
        d_ho=d_ho,
        d_hi_filtered=d_hi_f,
        d_ho_filtered=d_ho_f,
        events=events,
        all_tracks=tracks,
        tracks=survivors,
        timings=timings,
    )


def reconstruct_all(
    tracks: list[MaskTrack], dataset: ScanDataset, config: PipelineConfig
) -> list[DetectedObject]:
    out = []
    for track in tracks:
        try:
            recon = chain_icp_reconstruct(track, dataset, config.icp, config.stride, config.voxel_size)
        except DegenerateGeometryError as exc:
            log.warning("object %d: reconstruction failed: %s", track.object_id, exc)
            recon = None
        out.append(DetectedObject(track=track, reconstruction=recon))
    return out
