"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations

from collections import deque

import numpy as np


def brute_nearest(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Linear scan: exact nearest distance from each query to ``points``."""
    if len(points) == 0:
        return np.full(len(query), np.inf)
    out = np.empty(len(query))
    for i, q in enumerate(query):
        out[i] = np.sqrt(np.min(np.sum((points - q) ** 2, axis=1)))
    return out


def flood_fill_labels(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected labelling by BFS, labels assigned in raster order of first pixel."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int64)
    n = 0
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or labels[r, c]:
                continue
            n += 1
            labels[r, c] = n
            queue = deque([(r, c)])
            while queue:
                y, x = queue.popleft()
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not labels[yy, xx]:
                        labels[yy, xx] = n
                        queue.append((yy, xx))
    return labels, n


def crossing_state_machine(d_hi, d_ho, min_duration: int) -> list[tuple[int, int]]:
    """Explicit two-state automaton written independently of the library version."""
    state = "idle"
    opened = -1
    raw = []
    for t, (a, b) in enumerate(zip(d_hi, d_ho)):
        a, b = float(a), float(b)
        if state == "idle":
            if a > b:
                state, opened = "open", t
        else:
            if a < b:
                raw.append((opened, t - 1))
                state = "idle"
    if state == "open":
        raw.append((opened, len(d_hi) - 1))
    return [(s, e) for s, e in raw if e - s + 1 >= min_duration]


def exhaustive_best_frame(start: int, end: int, masks, tau: float) -> int | None:
    """Enumerate every window of frames and pick the rule's answer by brute force."""

    def iou(a, b):
        union = np.count_nonzero(a | b)
        return 0.0 if union == 0 else np.count_nonzero(a & b) / union

    ious = {t: iou(masks[t - 1], masks[t]) for t in range(start + 1, end + 1)}
    best_span = None
    for s in range(start + 1, end + 1):
        for e in range(s, end + 1):
            if not all(ious[t] >= tau for t in range(s, e + 1)):
                continue
            # maximal: cannot extend on either side
            if s - 1 in ious and ious[s - 1] >= tau:
                continue
            if e + 1 in ious and ious[e + 1] >= tau:
                continue
            length = e - s + 1
            if best_span is None or length > best_span[1] - best_span[0] + 1:
                best_span = (s, e)
    if best_span is None:
        return None
    s, e = best_span
    top = max(ious[t] for t in range(s, e + 1))
    return min(t for t in range(s, e + 1) if ious[t] == top)


def slab_ray_box(origin, direction, half_size, body_to_world) -> float:
    """Entry parameter of a ray into an oriented box, one ray at a time; inf on a miss."""
    R, t = body_to_world.rotation, body_to_world.translation
    o = R.T @ (np.asarray(origin, float) - t)
    d = R.T @ np.asarray(direction, float)
    t_near, t_far = -np.inf, np.inf
    for axis in range(3):
        if d[axis] == 0.0:
            if abs(o[axis]) > half_size[axis]:
                return np.inf
            continue
        t1 = (-half_size[axis] - o[axis]) / d[axis]
        t2 = (half_size[axis] - o[axis]) / d[axis]
        t_near = max(t_near, min(t1, t2))
        t_far = min(t_far, max(t1, t2))
    if t_near > t_far or t_far < 0:
        return np.inf
    return t_near if t_near > 0 else np.inf


def box_surface_distance(points: np.ndarray, half_size, body_to_world) -> np.ndarray:
    """Unsigned distance from world points to the surface of an oriented box."""
    local = body_to_world.inverse().apply(points)
    q = np.abs(local) - np.asarray(half_size)
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(q.max(axis=1), 0.0)
    return np.abs(outside + inside)
