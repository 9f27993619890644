from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import exhaustive_best_frame

from interactscan.errors import InvalidParameterError, NoStablePeriodError
from interactscan.interaction import InteractionEvent
from interactscan.selection import (
    MaskTrack,
    containment_fraction,
    cross_frame_ious,
    mask_iou,
    nms,
    select_best_frame,
    stable_periods,
    track_mask,
)


def prefix_mask(n_pixels: int, shape=(20, 40)) -> np.ndarray:
    """First ``n_pixels`` in raster order; IoU of two prefixes is min/max of sizes."""
    m = np.zeros(shape[0] * shape[1], bool)
    m[:n_pixels] = True
    return m.reshape(shape)


def rect(shape, r0, r1, c0, c1) -> np.ndarray:
    m = np.zeros(shape, bool)
    m[r0:r1, c0:c1] = True
    return m


def make_track(object_id, masks, best=None) -> MaskTrack:
    masks = np.asarray(masks, dtype=bool)
    if best is None:
        best = int(np.flatnonzero(masks.reshape(len(masks), -1).any(axis=1))[0])
    return MaskTrack(object_id, masks, best, InteractionEvent(0, len(masks) - 1))


class TestMaskIou:
    def test_identical(self):
        m = rect((10, 10), 2, 5, 2, 5)
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        assert mask_iou(rect((10, 10), 0, 2, 0, 2), rect((10, 10), 5, 7, 5, 7)) == 0.0

    def test_one_third(self):
        a = rect((20, 20), 0, 10, 0, 10)  # 100 px
        b = rect((20, 20), 5, 10, 0, 20)  # 100 px, 50 shared
        assert mask_iou(a, b) == pytest.approx(1 / 3)

    def test_both_empty(self):
        assert mask_iou(np.zeros((3, 3), bool), np.zeros((3, 3), bool)) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidParameterError):
            mask_iou(np.zeros((3, 3), bool), np.zeros((3, 4), bool))


class TestSelectBestFrame:
    def test_identical_masks(self):
        masks = [rect((8, 8), 1, 4, 1, 4)] * 10
        assert select_best_frame(InteractionEvent(2, 8), masks, 0.8) == 3

    def test_longest_run_then_earliest(self):
        masks = [prefix_mask(n) for n in (100, 90, 81, 405, 450)]
        ev = InteractionEvent(0, 4)
        np.testing.assert_allclose(cross_frame_ious(ev, masks), [0.9, 0.9, 0.2, 0.9])
        periods = stable_periods(ev, cross_frame_ious(ev, masks), 0.8)
        assert [(p.start, p.end) for p in periods] == [(1, 2), (4, 4)]
        assert select_best_frame(ev, masks, 0.8) == 1

    def test_no_stable_period(self):
        masks = [prefix_mask(n) for n in (10, 100, 10, 100)]
        with pytest.raises(NoStablePeriodError):
            select_best_frame(InteractionEvent(0, 3), masks, 0.8)

    def test_too_short(self):
        with pytest.raises(InvalidParameterError):
            select_best_frame(InteractionEvent(1, 1), [prefix_mask(5)] * 3, 0.8)

    @settings(max_examples=300, deadline=None)
    @given(sizes=st.lists(st.integers(0, 40), min_size=2, max_size=14), tau=st.sampled_from([0.5, 0.75, 0.8, 0.9, 1.0]))
    def test_matches_exhaustive_rescan(self, sizes, tau):
        masks = [prefix_mask(n, (5, 8)) for n in sizes]
        ev = InteractionEvent(0, len(sizes) - 1)
        expected = exhaustive_best_frame(ev.start, ev.end, masks, tau)
        if expected is None:
            with pytest.raises(NoStablePeriodError):
                select_best_frame(ev, masks, tau)
        else:
            best = select_best_frame(ev, masks, tau)
            assert best == expected
            assert ev.start < best <= ev.end


class TestTrackMask:
    shape = (30, 40)

    def test_static_object(self):
        m = rect(self.shape, 5, 15, 5, 15)
        moving = np.stack([m] * 6)
        arm = np.zeros_like(moving)
        track = track_mask(m, 2, moving, arm)
        np.testing.assert_array_equal(track.masks, moving)

    def test_translating_object(self):
        gt = np.stack([rect(self.shape, 10, 20, 2 + t, 12 + t) for t in range(20)])
        moving = gt.copy()
        moving[:, 0:3, 30:40] = True  # unrelated blob
        arm = np.zeros_like(moving)
        arm[:, 20:30, :] = True
        moving |= arm
        track = track_mask(gt[7], 7, moving, arm)
        np.testing.assert_array_equal(track.masks, gt)

    def test_leaves_view(self):
        gt = [rect(self.shape, 10, 20, 5 + 4 * t, 15 + 4 * t) if t < 5 else np.zeros(self.shape, bool) for t in range(8)]
        moving = np.stack(gt)
        moving[6] = rect(self.shape, 10, 20, 5, 15)  # reappears elsewhere: not re-acquired
        arm = np.zeros_like(moving)
        track = track_mask(gt[0], 0, moving, arm)
        np.testing.assert_array_equal(track.nonempty_frames(), [0, 1, 2, 3, 4])

    def test_low_overlap_stops(self):
        a = rect(self.shape, 0, 10, 0, 10)
        b = rect(self.shape, 0, 10, 9, 19)  # IoU 10 / 190 < 0.1
        track = track_mask(a, 0, np.stack([a, b]), np.zeros((2,) + self.shape, bool))
        assert not track.masks[1].any()

    def test_empty_seed(self):
        with pytest.raises(InvalidParameterError):
            track_mask(np.zeros(self.shape, bool), 0, np.zeros((1,) + self.shape, bool), np.zeros((1,) + self.shape, bool))

    def test_track_requires_nonempty_best_frame(self):
        with pytest.raises(InvalidParameterError):
            MaskTrack(0, np.zeros((2, 3, 3), bool), 1, InteractionEvent(0, 1))


class TestContainment:
    shape = (10, 10)

    def test_identical(self):
        a = make_track(0, [rect(self.shape, 0, 4, 0, 4)] * 3)
        assert containment_fraction(a, a) == 1.0

    def test_disjoint(self):
        a = make_track(0, [rect(self.shape, 0, 4, 0, 4)] * 3)
        b = make_track(1, [rect(self.shape, 5, 9, 5, 9)] * 3)
        assert containment_fraction(a, b) == 0.0

    def test_half_inside(self):
        a = make_track(0, [rect(self.shape, 0, 4, 0, 4), np.zeros(self.shape, bool), rect(self.shape, 2, 4, 0, 6)])
        b = make_track(1, [rect(self.shape, 0, 2, 0, 4), rect(self.shape, 0, 9, 0, 9), rect(self.shape, 2, 4, 0, 3)])
        assert containment_fraction(a, b) == 0.5

    def test_length_mismatch(self):
        a = make_track(0, [rect(self.shape, 0, 4, 0, 4)] * 3)
        b = make_track(1, [rect(self.shape, 0, 4, 0, 4)] * 2)
        with pytest.raises(InvalidParameterError):
            containment_fraction(a, b)


class TestNms:
    shape = (20, 20)

    def test_disjoint_unchanged(self):
        tracks = [make_track(i, [rect(self.shape, 4 * i, 4 * i + 3, 0, 5)] * 4) for i in range(4)]
        assert nms(tracks, 0.5) == tracks

    def test_subset_removed(self):
        big = rect(self.shape, 0, 10, 0, 10)
        small = rect(self.shape, 0, 4, 0, 10)  # 40 px inside a 100 px mask
        a = make_track(0, [small] * 3)
        b = make_track(1, [big] * 3)
        assert containment_fraction(a, b) == 1.0 and containment_fraction(b, a) == pytest.approx(0.4)
        assert nms([a, b], 0.5) == [b]

    def test_duplicates_keep_lower_id(self):
        m = rect(self.shape, 2, 8, 2, 8)
        a, b = make_track(3, [m] * 2), make_track(1, [m] * 2)
        survivors = nms([a, b], 0.5)
        assert len(survivors) == 1 and survivors[0].object_id == 3

    def test_threshold_is_strict(self):
        big = rect(self.shape, 0, 10, 0, 10)
        half = rect(self.shape, 0, 10, 0, 5) | rect(self.shape, 10, 20, 0, 5)
        a, b = make_track(0, [half] * 2), make_track(1, [big] * 2)
        assert containment_fraction(a, b) == 0.5
        assert len(nms([a, b], 0.5)) == 2

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(0, 6), tau=st.floats(0.05, 1.0))
    def test_postcondition(self, seed, n, tau):
        rng = np.random.default_rng(seed)
        tracks = []
        for i in range(n):
            masks = np.zeros((4, 8, 8), bool)
            for t in range(4):
                r0, c0 = rng.integers(0, 6, size=2)
                masks[t, r0 : r0 + rng.integers(1, 4), c0 : c0 + rng.integers(1, 4)] = True
            tracks.append(make_track(int(rng.integers(0, 100)), masks, 0))
        survivors = nms(tracks, tau)
        ids = [id(t) for t in survivors]
        assert ids == [id(t) for t in tracks if id(t) in set(ids)]  # subset, original order
        for a in survivors:
            for b in survivors:
                if a is not b:
                    assert containment_fraction(a, b) <= tau
        for t in tracks:
            isolated = all(
                containment_fraction(t, o) == 0 and containment_fraction(o, t) == 0 for o in tracks if o is not t
            )
            if isolated:
                assert any(t is s for s in survivors)
