"""Hand distance trajectories and crossing-based interaction detection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset_io import ScanDataset
from .discovery import frame_points_world
from .errors import InvalidParameterError
from .geometry import SpatialIndex, build_index, percentile_set_distance


@dataclass(frozen=True)
class InteractionEvent:
    start: int
    end: int  # inclusive

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise InvalidParameterError(f"bad interaction interval [{self.start}, {self.end}]")

    @property
    def duration(self) -> int:
        return self.end - self.start + 1

    def to_dict(self) -> dict[str, int]:
        return {"start": self.start, "end": self.end}


def distance_trajectories(
    dataset: ScanDataset,
    initial_index: SpatialIndex,
    hand_masks: Sequence[np.ndarray],
    candidate_masks: Sequence[np.ndarray],
    q: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame hand-initial and hand-object distances (``inf`` where a set is empty)."""
    n = len(dataset)
    d_hi = np.full(n, np.inf)
    d_ho = np.full(n, np.inf)
    K = dataset.intrinsics
    for t, frame in enumerate(dataset.frames):
        if not hand_masks[t].any():
            continue
        hand_pts = frame_points_world(frame, K, hand_masks[t])
        if len(hand_pts) == 0:
            continue
        d_hi[t] = percentile_set_distance(hand_pts, initial_index, q)
        if candidate_masks[t].any():
            obj_index = build_index(frame_points_world(frame, K, candidate_masks[t]))
            d_ho[t] = percentile_set_distance(hand_pts, obj_index, q)
    return d_hi, d_ho


def median_filter(signal, window: int) -> np.ndarray:
    """Running median with edge replication. ``inf`` sorts as the largest value."""
    if window < 1 or window % 2 != 1:
        raise InvalidParameterError(f"median window must be a positive odd number, got {window}")
    x = np.asarray(signal, dtype=np.float64)
    if window == 1 or len(x) == 0:
        return x.copy()
    half = window // 2
    padded = np.pad(x, half, mode="edge")
    windows = np.sort(sliding_window_view(padded, window), axis=1)
    return windows[:, half].copy()


def detect_interactions(d_hi, d_ho, min_duration: int) -> list[InteractionEvent]:
    """Intervals where the hand-initial distance stays above the hand-object distance.

    Equal values (including inf == inf) neither open nor close an interval.
    """
    hi = np.asarray(d_hi, dtype=np.float64)
    ho = np.asarray(d_ho, dtype=np.float64)
    if hi.shape != ho.shape:
        raise InvalidParameterError("distance trajectories must have equal length")
    above = hi > ho
    below = hi < ho
    events: list[InteractionEvent] = []
    start = None
    for t in range(len(hi)):
        if start is None:
            if above[t]:
                start = t
        elif below[t]:
            events.append(InteractionEvent(start, t - 1))
            start = None
    if start is not None:
        events.append(InteractionEvent(start, len(hi) - 1))
    return [e for e in events if e.duration >= min_duration]
