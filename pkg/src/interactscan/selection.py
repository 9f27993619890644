"""Best-frame choice, baseline 2D mask tracking, and containment-based NMS.

:func:`track_mask` is a deliberately simple geometric tracker (adjacent
frame blob IoU chaining). Anything with the same signature, e.g. a learned
video-segmentation tracker, can be passed to the pipeline instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discovery import connected_components
from .errors import InvalidParameterError, NoStablePeriodError
from .interaction import InteractionEvent

TRACK_MIN_IOU = 0.1


@dataclass(eq=False)
class MaskTrack:
    object_id: int
    masks: np.ndarray  # (T, H, W) bool, empty where untracked
    best_frame: int
    interaction: InteractionEvent

    def __post_init__(self) -> None:
        if not self.masks[self.best_frame].any():
            raise InvalidParameterError("track must be non-empty at its best frame")

    def __len__(self) -> int:
        return len(self.masks)

    def nonempty_frames(self) -> np.ndarray:
        return np.flatnonzero(self.masks.reshape(len(self.masks), -1).any(axis=1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskTrack):
            return NotImplemented
        return (
            self.object_id == other.object_id
            and self.best_frame == other.best_frame
            and self.interaction == other.interaction
            and np.array_equal(self.masks, other.masks)
        )


@dataclass(frozen=True)
class StablePeriod:
    start: int
    end: int


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise InvalidParameterError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def cross_frame_ious(interaction: InteractionEvent, masks: Sequence[np.ndarray]) -> np.ndarray:
    """``ious[i]`` is the IoU between frames ``start + i`` and ``start + i + 1``."""
    s, e = interaction.start, interaction.end
    return np.array([mask_iou(masks[t - 1], masks[t]) for t in range(s + 1, e + 1)])


def stable_periods(interaction: InteractionEvent, ious: np.ndarray, tau_iou: float) -> list[StablePeriod]:
    periods = []
    run_start = None
    for i, value in enumerate(ious):
        t = interaction.start + 1 + i
        if value >= tau_iou:
            if run_start is None:
                run_start = t
        elif run_start is not None:
            periods.append(StablePeriod(run_start, t - 1))
            run_start = None
    if run_start is not None:
        periods.append(StablePeriod(run_start, interaction.start + len(ious)))
    return periods


def select_best_frame(interaction: InteractionEvent, masks: Sequence[np.ndarray], tau_iou: float) -> int:
    if interaction.duration < 2:
        raise InvalidParameterError("best-frame selection needs an interaction of at least 2 frames")
    ious = cross_frame_ious(interaction, masks)
    periods = stable_periods(interaction, ious, tau_iou)
    if not periods:
        raise NoStablePeriodError(f"no stable period in frames {interaction.start}..{interaction.end}")
    # max() keeps the first maximum, so ties go to the earliest period / frame
    longest = max(periods, key=lambda p: p.end - p.start + 1)
    offset = interaction.start + 1
    window = ious[longest.start - offset : longest.end - offset + 1]
    return longest.start + int(np.argmax(window))


def _best_overlapping_blob(current: np.ndarray, candidates: np.ndarray) -> np.ndarray | None:
    labels, n = connected_components(candidates)
    if n == 0:
        return None
    inter = np.bincount(labels[current], minlength=n + 1)[1:]
    area = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    iou = inter / (area + np.count_nonzero(current) - inter)
    k = int(np.argmax(iou))
    if iou[k] < TRACK_MIN_IOU:
        return None
    return labels == k + 1


def track_mask(
    seed: np.ndarray,
    best_frame: int,
    moving_masks: Sequence[np.ndarray],
    arm_masks: Sequence[np.ndarray],
    object_id: int = 0,
    interaction: InteractionEvent | None = None,
) -> MaskTrack:
    """Propagate ``seed`` forward then backward through blobs of (moving minus arm)."""
    if not seed.any():
        raise InvalidParameterError("cannot track an empty seed mask")
    n = len(moving_masks)
    masks = np.zeros((n,) + seed.shape, dtype=bool)
    masks[best_frame] = seed
    for direction in (1, -1):
        current = seed
        t = best_frame + direction
        while 0 <= t < n:
            nxt = _best_overlapping_blob(current, moving_masks[t] & ~arm_masks[t])
            if nxt is None:
                break
            masks[t] = nxt
            current = nxt
            t += direction
    if interaction is None:
        interaction = InteractionEvent(best_frame, best_frame)
    return MaskTrack(object_id=object_id, masks=masks, best_frame=best_frame, interaction=interaction)


def containment_fraction(a: MaskTrack, b: MaskTrack) -> float:
    """Mean share of ``a``'s mask lying inside ``b``'s, over frames where ``a`` is non-empty."""
    if len(a) != len(b):
        raise InvalidParameterError("tracks cover different scan lengths")
    frames = a.nonempty_frames()
    if len(frames) == 0:
        return 0.0
    am = a.masks[frames].reshape(len(frames), -1)
    bm = b.masks[frames].reshape(len(frames), -1)
    inside = np.count_nonzero(am & bm, axis=1)
    area = np.count_nonzero(am, axis=1)
    return float(np.mean(inside / area))


def nms(tracks: Sequence[MaskTrack], tau_nms: float) -> list[MaskTrack]:
    """Greedily drop the most-contained track while any pair exceeds ``tau_nms``."""
    n = len(tracks)
    contains = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                contains[i, j] = containment_fraction(tracks[i], tracks[j])
    alive = list(range(n))
    while len(alive) > 1:
        sub = contains[np.ix_(alive, alive)]
        worst = sub.max(axis=1)
        if worst.max() <= tau_nms:
            break
        top = np.flatnonzero(worst == worst.max())
        victim = min((alive[k] for k in top), key=lambda i: tracks[i].object_id)
        alive.remove(victim)
    return [tracks[i] for i in alive]
