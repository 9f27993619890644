from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from interactscan.dataset_io import GroundTruth, PipelineConfig, ScanDataset, save_ground_truth, save_scan
from interactscan.evaluation import EvaluationReport, evaluate_scene
from interactscan.geometry import CameraIntrinsics
from interactscan.pipeline import DetectedObject, DiscoveryResult, reconstruct_all, run_discovery
from interactscan.simulator import Scenario, default_scenario, generate_scan, scenario_from_dict, default_scenario_dict

ACCEPTANCE_SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture
def K() -> CameraIntrinsics:
    # 256 wide so that u = 196 is inside the frame
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=96.0, cy=128.0, width=256, height=256)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@dataclass
class SceneRun:
    scenario: Scenario
    dataset: ScanDataset
    gt: GroundTruth
    discovery: DiscoveryResult
    objects: list[DetectedObject]
    report: EvaluationReport
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def run_scene(scenario: Scenario, name: str, config: PipelineConfig | None = None) -> SceneRun:
    config = config or PipelineConfig()
    t0 = time.perf_counter()
    dataset, gt = generate_scan(scenario)
    discovery = run_discovery(dataset, config, threads=1)
    objects = reconstruct_all(discovery.tracks, dataset, config)
    seconds = time.perf_counter() - t0
    report = evaluate_scene(name, discovery.tracks, [o.reconstruction for o in objects], dataset, gt)
    return SceneRun(scenario, dataset, gt, discovery, objects, report, seconds)


@pytest.fixture(scope="session")
def small_scenario_dict() -> dict:
    # one pick-up: 90 static frames, event [90, 240], 30 trailing frames
    return default_scenario_dict(seed=7, n_objects=1)


@pytest.fixture(scope="session")
def small_run(small_scenario_dict) -> SceneRun:
    return run_scene(scenario_from_dict(small_scenario_dict), "small")


@pytest.fixture(scope="session")
def small_scene_dir(small_run, tmp_path_factory):
    root = tmp_path_factory.mktemp("small_scene")
    save_scan(small_run.dataset, root)
    save_ground_truth(small_run.gt, root)
    return root


@pytest.fixture(scope="session")
def acceptance_runs() -> list[SceneRun]:
    return [run_scene(default_scenario(seed), f"scene{seed}") for seed in ACCEPTANCE_SEEDS]


@pytest.fixture(scope="session")
def noisy_run() -> SceneRun:
    return run_scene(default_scenario(0, depth_noise_sigma=0.005), "noisy0")


# --------------------------------------------------------------------------
# one pass/fail line per acceptance criterion in the terminal summary
# --------------------------------------------------------------------------

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "tests": 0})
    if report.when == "call":
        entry["tests"] += 1
    if report.failed or (report.when == "setup" and report.skipped):
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["passed"] and entry["tests"] else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{status}] {entry['title']} ({entry['tests']} tests)")
