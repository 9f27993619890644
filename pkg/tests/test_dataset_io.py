from __future__ import annotations

import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interactscan.dataset_io import (
    Frame,
    GroundTruth,
    GroundTruthObject,
    PipelineConfig,
    ScanDataset,
    load_config,
    load_ground_truth,
    load_scan,
    read_pgm,
    save_config,
    save_ground_truth,
    save_scan,
    write_pgm,
)
from interactscan.errors import (
    DatasetNotFoundError,
    DatasetWriteError,
    InconsistentDatasetError,
    InvalidConfigError,
    InvalidPoseError,
)
from interactscan.geometry import CameraIntrinsics, IcpParams, PointCloud, RigidTransform, rotation_about_axis

SMALL_K = CameraIntrinsics(fx=50.0, fy=55.0, cx=3.5, cy=2.5, width=8, height=6)


def make_dataset(n_frames: int = 2, seed: int = 0, K: CameraIntrinsics = SMALL_K) -> ScanDataset:
    rng = np.random.default_rng(seed)
    frames = []
    for t in range(n_frames):
        depth = rng.uniform(0.1, 3.0, size=K.shape).astype(np.float32)
        depth[rng.random(K.shape) < 0.25] = 0.0
        arm = rng.random(K.shape) < 0.3
        pose = RigidTransform(rotation_about_axis(rng.normal(size=3), rng.uniform(-3, 3)), rng.normal(size=3))
        frames.append(Frame(depth=depth, arm_mask=arm, pose=pose, timestamp=t / 60.0 + 0.1 * rng.random()))
    frames.sort(key=lambda f: f.timestamp)
    return ScanDataset(K, frames, {"note": "unit test", "seed": seed})


class TestScanRoundTrip:
    def test_two_frames(self, tmp_path):
        ds = make_dataset(2)
        save_scan(ds, tmp_path)
        loaded = load_scan(tmp_path)
        assert len(loaded) == 2
        assert loaded == ds

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 5))
    def test_identity(self, tmp_path_factory, seed, n):
        root = tmp_path_factory.mktemp("rt")
        ds = make_dataset(n, seed)
        save_scan(ds, root)
        assert load_scan(root) == ds

    def test_depth_bit_patterns(self, tmp_path):
        ds = make_dataset(1)
        special = np.array([0.0, np.float32(1e-38), np.nextafter(np.float32(1), np.float32(2)), 123.456], dtype=np.float32)
        ds.frames[0].depth.reshape(-1)[:4] = special
        save_scan(ds, tmp_path)
        loaded = load_scan(tmp_path).frames[0].depth
        np.testing.assert_array_equal(loaded.view(np.uint32), ds.frames[0].depth.view(np.uint32))
        assert loaded.dtype == np.float32

    def test_layout(self, tmp_path):
        save_scan(make_dataset(2), tmp_path)
        assert (tmp_path / "manifest.json").is_file()
        assert (tmp_path / "depth" / "000001.f32").stat().st_size == 8 * 6 * 4
        assert read_pgm(tmp_path / "arm_mask" / "000000.pgm").shape == (6, 8)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(manifest["poses"][0]) == 12

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(DatasetWriteError):
            save_scan(make_dataset(1), blocker / "sub")


class TestScanErrors:
    def _saved(self, tmp_path):
        save_scan(make_dataset(2), tmp_path)
        return json.loads((tmp_path / "manifest.json").read_text())

    def _rewrite(self, tmp_path, manifest):
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetNotFoundError):
            load_scan(tmp_path / "nope")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DatasetNotFoundError):
            load_scan(tmp_path)

    def test_pose_count_mismatch(self, tmp_path):
        m = self._saved(tmp_path)
        m["poses"].append(m["poses"][0])
        self._rewrite(tmp_path, m)
        with pytest.raises(InconsistentDatasetError):
            load_scan(tmp_path)

    def test_depth_wrong_length(self, tmp_path):
        self._saved(tmp_path)
        path = tmp_path / "depth" / "000001.f32"
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(InconsistentDatasetError):
            load_scan(tmp_path)

    def test_missing_depth_file(self, tmp_path):
        self._saved(tmp_path)
        os.remove(tmp_path / "depth" / "000000.f32")
        with pytest.raises(DatasetNotFoundError):
            load_scan(tmp_path)

    def test_mask_resolution_mismatch(self, tmp_path):
        self._saved(tmp_path)
        write_pgm(tmp_path / "arm_mask" / "000000.pgm", np.zeros((6, 7), dtype=bool))
        with pytest.raises(InconsistentDatasetError):
            load_scan(tmp_path)

    def test_non_orthonormal_pose(self, tmp_path):
        m = self._saved(tmp_path)
        m["poses"][1][0] = 1.5
        self._rewrite(tmp_path, m)
        with pytest.raises(InvalidPoseError):
            load_scan(tmp_path)

    def test_timestamps_must_increase(self, tmp_path):
        m = self._saved(tmp_path)
        m["timestamps"] = [1.0, 1.0]
        self._rewrite(tmp_path, m)
        with pytest.raises(InconsistentDatasetError):
            load_scan(tmp_path)

    def test_negative_depth(self, tmp_path):
        self._saved(tmp_path)
        depth = np.full((6, 8), -1.0, dtype="<f4")
        (tmp_path / "depth" / "000000.f32").write_bytes(depth.tobytes())
        with pytest.raises(InconsistentDatasetError):
            load_scan(tmp_path)

    def test_corrupt_manifest(self, tmp_path):
        self._saved(tmp_path)
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(InconsistentDatasetError):
            load_scan(tmp_path)


class TestPgm:
    def test_round_trip(self, tmp_path):
        img = np.random.default_rng(1).integers(0, 256, size=(5, 7)).astype(np.uint8)
        write_pgm(tmp_path / "a.pgm", img)
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)

    def test_bool_is_0_or_255(self, tmp_path):
        write_pgm(tmp_path / "m.pgm", np.array([[True, False]]))
        assert (tmp_path / "m.pgm").read_bytes().endswith(b"\xff\x00")

    def test_comment_in_header(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
        np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[1, 2]])

    @pytest.mark.parametrize("data", [b"P2\n1 1\n255\n0", b"P5\n1 1\n65535\n\x00\x00", b"P5\n2 2\n255\n\x00"])
    def test_rejects(self, tmp_path, data):
        (tmp_path / "bad.pgm").write_bytes(data)
        with pytest.raises(InconsistentDatasetError):
            read_pgm(tmp_path / "bad.pgm")


def make_ground_truth(n_frames: int = 3) -> GroundTruth:
    rng = np.random.default_rng(3)
    objs = [
        GroundTruthObject(
            object_id=k,
            interval=(0, 1) if k == 0 else None,
            poses=[RigidTransform.from_translation(*rng.normal(size=3)) for _ in range(n_frames)],
            surface=PointCloud(rng.normal(size=(20, 3)), "world"),
            shape={"type": "box", "size": [0.1, 0.05, 0.03]},
        )
        for k in range(2)
    ]
    labels = rng.integers(0, 3, size=(n_frames, 6, 8)).astype(np.uint8)
    return GroundTruth(objs, labels)


class TestGroundTruth:
    def test_round_trip(self, tmp_path):
        gt = make_ground_truth()
        save_ground_truth(gt, tmp_path)
        assert load_ground_truth(tmp_path, (6, 8)) == gt

    def test_masks(self):
        gt = make_ground_truth()
        np.testing.assert_array_equal(gt.mask(1, 2), gt.labels[2] == 2)
        assert gt.masks(0).shape == (3, 6, 8)

    def test_interval_outside_scan(self, tmp_path):
        save_ground_truth(make_ground_truth(), tmp_path)
        doc = json.loads((tmp_path / "gt" / "objects.json").read_text())
        doc["objects"][0]["interval"] = [0, 3]
        (tmp_path / "gt" / "objects.json").write_text(json.dumps(doc))
        with pytest.raises(InconsistentDatasetError):
            load_ground_truth(tmp_path)

    def test_malformed_entry(self, tmp_path):
        save_ground_truth(make_ground_truth(), tmp_path)
        doc = json.loads((tmp_path / "gt" / "objects.json").read_text())
        del doc["objects"][0]["poses"]
        (tmp_path / "gt" / "objects.json").write_text(json.dumps(doc))
        with pytest.raises(InconsistentDatasetError):
            load_ground_truth(tmp_path)

    def test_missing(self, tmp_path):
        with pytest.raises(DatasetNotFoundError):
            load_ground_truth(tmp_path)


class TestConfig:
    def test_defaults(self):
        c = PipelineConfig()
        assert (c.rho_moving, c.min_blob_area, c.hand_span_fraction, c.distance_percentile) == (0.05, 100, 0.10, 0.1)
        assert (c.median_window, c.min_interaction_duration, c.tau_iou, c.tau_nms, c.voxel_size) == (9, 60, 0.8, 0.5, 0.005)
        assert c.stride == 5 and c.icp == IcpParams()

    def test_empty_file(self, tmp_path):
        (tmp_path / "pipeline.json").write_text("")
        assert load_config(tmp_path / "pipeline.json") == PipelineConfig()

    def test_partial_file(self, tmp_path):
        (tmp_path / "pipeline.json").write_text(json.dumps({"rho_moving": 0.03, "icp": {"max_iterations": 7}}))
        c = load_config(tmp_path / "pipeline.json")
        assert c.rho_moving == 0.03 and c.icp.max_iterations == 7 and c.tau_iou == 0.8

    @pytest.mark.parametrize(
        "doc",
        [
            {"rho_moving": -0.01},
            {"median_window": 8},
            {"median_window": 9.0},
            {"tau_iou": 1.5},
            {"tau_nms": 0},
            {"unknown_key": 1},
            {"icp": {"bogus": 1}},
            {"icp": {"max_iterations": 0}},
            {"icp": 3},
            [1, 2],
        ],
    )
    def test_invalid(self, tmp_path, doc):
        (tmp_path / "pipeline.json").write_text(json.dumps(doc))
        with pytest.raises(InvalidConfigError):
            load_config(tmp_path / "pipeline.json")

    def test_bad_json(self, tmp_path):
        (tmp_path / "pipeline.json").write_text("{")
        with pytest.raises(InvalidConfigError):
            load_config(tmp_path / "pipeline.json")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetNotFoundError):
            load_config(tmp_path / "nope.json")

    def test_round_trip(self, tmp_path):
        c = PipelineConfig(rho_moving=0.0123456789012345, icp=IcpParams(17, 1e-8, 0.03), stride=3)
        save_config(c, tmp_path / "c.json")
        assert load_config(tmp_path / "c.json") == c
