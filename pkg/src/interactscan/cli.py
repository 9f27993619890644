"""Command-line entry point: ``interactscan {simulate,pipeline,discover,reconstruct,evaluate}``.

Exit statuses: 0 success, 2 bad input or configuration, 3 the run finished
cleanly but found no objects.

A run directory looks like::

    run.json                          manifest (written last, atomically)
    objects/object_000/track.json     best frame, interaction, non-empty frames
    objects/object_000/masks/*.pgm    one mask per non-empty frame
    objects/object_000/model.ply      reconstructed model, object frame
    objects/object_000/poses.json     object -> camera pose per processed frame
    debug/...                         only with --debug
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dataset_io import (
    PipelineConfig,
    ScanDataset,
    load_config,
    load_ground_truth,
    load_scan,
    read_mask,
    save_ground_truth,
    save_scan,
    write_pgm,
)
from .errors import InconsistentDatasetError, NoInteractionPhaseError, ScanError
from .evaluation import evaluate_scene, format_table
from .interaction import InteractionEvent
from .pipeline import DiscoveryResult, reconstruct_all, run_discovery
from .reconstruction import ObjectReconstruction, read_reconstruction, write_reconstruction
from .selection import MaskTrack
from .simulator import generate_scan, scenario_from_dict

log = logging.getLogger("interactscan")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3

MANIFEST = "run.json"


class UsageError(Exception):
    """Bad command-line input that is not a data error."""


@dataclass
class RunManifest:
    command: str
    dataset: str
    config: dict[str, Any]
    seed: int
    timings: dict[str, float] = field(default_factory=dict)
    objects: list[dict[str, Any]] = field(default_factory=list)
    debug: dict[str, str] = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": "interactscan",
            "version": self.version,
            "command": self.command,
            "seed": self.seed,
            "dataset": self.dataset,
            "config": self.config,
            "timings": self.timings,
            "wall_clock": self.wall_clock,
            "outputs": {"objects": self.objects, "debug": self.debug},
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> RunManifest:
        outputs = doc.get("outputs", {})
        return cls(
            command=doc["command"],
            dataset=doc["dataset"],
            config=doc["config"],
            seed=int(doc["seed"]),
            timings=dict(doc.get("timings", {})),
            objects=list(outputs.get("objects", [])),
            debug=dict(outputs.get("debug", {})),
            wall_clock=float(doc.get("wall_clock", 0.0)),
            version=doc.get("version", __version__),
        )

    def referenced_paths(self) -> list[str]:
        paths = [p for obj in self.objects for key, p in obj.items() if key != "object_id"]
        return paths + list(self.debug.values())


def write_manifest(run_dir: Path, manifest: RunManifest) -> Path:
    """Write ``run.json`` via a temporary file and an atomic rename."""
    missing = [p for p in manifest.referenced_paths() if not (run_dir / p).exists()]
    if missing:
        raise InconsistentDatasetError(f"manifest references missing outputs: {missing}")
    target = run_dir / MANIFEST
    fd, tmp = tempfile.mkstemp(prefix=".run.", suffix=".json", dir=run_dir)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
            fh.write("\n")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def read_manifest(run_dir: Path) -> RunManifest:
    path = run_dir / MANIFEST
    if not path.is_file():
        raise UsageError(f"{run_dir} has no {MANIFEST}; not a run directory")
    try:
        return RunManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InconsistentDatasetError(f"{path}: malformed manifest ({exc})") from exc


# --------------------------------------------------------------------------
# track files
# --------------------------------------------------------------------------


def write_track(directory: Path, track: MaskTrack) -> dict[str, str]:
    masks_dir = directory / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    frames = [int(t) for t in track.nonempty_frames()]
    for t in frames:
        write_pgm(masks_dir / f"{t:06d}.pgm", track.masks[t])
    doc = {
        "object_id": track.object_id,
        "best_frame": track.best_frame,
        "interaction": track.interaction.to_dict(),
        "frame_count": len(track),
        "shape": list(track.masks.shape[1:]),
        "frames": frames,
    }
    (directory / "track.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return {"track": str(directory / "track.json"), "masks": str(masks_dir)}


def read_track(directory: Path) -> MaskTrack:
    path = directory / "track.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        shape = tuple(int(s) for s in doc["shape"])
        masks = np.zeros((int(doc["frame_count"]), *shape), dtype=bool)
        for t in doc["frames"]:
            masks[int(t)] = read_mask(directory / "masks" / f"{int(t):06d}.pgm", shape)
        inter = doc["interaction"]
        return MaskTrack(
            object_id=int(doc["object_id"]),
            masks=masks,
            best_frame=int(doc["best_frame"]),
            interaction=InteractionEvent(int(inter["start"]), int(inter["end"])),
        )
    except (json.JSONDecodeError, KeyError, TypeError, IndexError) as exc:
        raise InconsistentDatasetError(f"{path}: malformed track ({exc})") from exc


def _object_dir(run_dir: Path, object_id: int) -> Path:
    return run_dir / "objects" / f"object_{object_id:03d}"


def _relative(paths: dict[str, str], root: Path) -> dict[str, str]:
    return {k: os.path.relpath(v, root) for k, v in paths.items()}


def _fresh_run_dir(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    # only clear outputs of an earlier run, never arbitrary directories
    if (out / MANIFEST).is_file():
        for sub in ("objects", "debug"):
            if (out / sub).is_dir():
                shutil.rmtree(out / sub)


def _write_debug(run_dir: Path, result: DiscoveryResult) -> dict[str, str]:
    root = run_dir / "debug"
    moving_dir = root / "moving"
    moving_dir.mkdir(parents=True, exist_ok=True)
    for t, m in enumerate(result.moving):
        write_pgm(moving_dir / f"{t:06d}.pgm", m)
    traj = root / "trajectories.csv"
    with open(traj, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "d_hi", "d_ho", "d_hi_filtered", "d_ho_filtered"])
        for t in range(len(result.d_hi)):
            w.writerow([t] + [repr(float(a[t])) for a in (result.d_hi, result.d_ho, result.d_hi_filtered, result.d_ho_filtered)])
    intervals = root / "interactions.json"
    doc = {"static_end": result.static_end, "interactions": [e.to_dict() for e in result.events]}
    intervals.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return _relative({"moving": str(moving_dir), "trajectories": str(traj), "interactions": str(intervals)}, run_dir)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _resolve_config(path: str | None, stride: int | None) -> PipelineConfig:
    config = load_config(path) if path else PipelineConfig()
    if stride is not None:
        config = config.replace(stride=stride)
    return config


def _discover(args, config: PipelineConfig, dataset: ScanDataset) -> DiscoveryResult | None:
    try:
        return run_discovery(dataset, config, threads=args.threads)
    except NoInteractionPhaseError as exc:
        log.warning("%s", exc)
        return None


def _run(args, reconstruct: bool) -> int:
    t_start = time.perf_counter()
    config = _resolve_config(args.config, args.stride)
    dataset_path = Path(args.dataset)
    dataset = load_scan(dataset_path)
    timings: dict[str, float] = {}
    timings["load"] = time.perf_counter() - t_start
    out = Path(args.out)
    _fresh_run_dir(out)

    result = _discover(args, config, dataset)
    tracks = result.tracks if result is not None else []
    if result is not None:
        timings.update(result.timings)
    recons: list[ObjectReconstruction | None] = [None] * len(tracks)
    if reconstruct and tracks:
        t0 = time.perf_counter()
        recons = [d.reconstruction for d in reconstruct_all(tracks, dataset, config)]
        timings["reconstruction"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    objects = []
    for track, recon in zip(tracks, recons):
        obj_dir = _object_dir(out, track.object_id)
        paths = write_track(obj_dir, track)
        if recon is not None:
            paths.update(write_reconstruction(obj_dir, recon))
        objects.append({"object_id": track.object_id, **_relative(paths, out)})
    debug = _write_debug(out, result) if args.debug and result is not None else {}
    timings["write"] = time.perf_counter() - t0

    manifest = RunManifest(
        command=args.command,
        dataset=str(dataset_path.resolve()),
        config=config.to_dict(),
        seed=args.seed,
        timings=timings,
        objects=objects,
        debug=debug,
    )
    manifest.wall_clock = time.perf_counter() - t_start
    write_manifest(out, manifest)
    print(f"{len(objects)} object(s) written to {out}")
    return EXIT_OK if objects else EXIT_EMPTY


def cmd_pipeline(args) -> int:
    return _run(args, reconstruct=True)


def cmd_discover(args) -> int:
    return _run(args, reconstruct=False)


def cmd_reconstruct(args) -> int:
    t_start = time.perf_counter()
    run_dir = Path(args.run)
    manifest = read_manifest(run_dir)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    config = _resolve_config(args.config, args.stride) if (args.config or args.stride) else PipelineConfig.from_dict(manifest.config)
    dataset_path = Path(args.dataset) if args.dataset else Path(manifest.dataset)
    dataset = load_scan(dataset_path)
    tracks = [read_track(run_dir / Path(obj["track"]).parent) for obj in manifest.objects]

    t0 = time.perf_counter()
    detected = reconstruct_all(tracks, dataset, config)
    timings = {"load": t0 - t_start, "reconstruction": time.perf_counter() - t0}
    t0 = time.perf_counter()
    objects = []
    for d in detected:
        obj_dir = _object_dir(out, d.track.object_id)
        paths = write_track(obj_dir, d.track) if out != run_dir else {
            "track": str(obj_dir / "track.json"), "masks": str(obj_dir / "masks")
        }
        if d.reconstruction is not None:
            paths.update(write_reconstruction(obj_dir, d.reconstruction))
        objects.append({"object_id": d.track.object_id, **_relative(paths, out)})
    timings["write"] = time.perf_counter() - t0
    new = RunManifest(
        command="reconstruct",
        dataset=str(dataset_path.resolve()),
        config=config.to_dict(),
        seed=manifest.seed if args.seed is None else args.seed,
        timings=timings,
        objects=objects,
        debug=manifest.debug if out == run_dir else {},
    )
    new.wall_clock = time.perf_counter() - t_start
    write_manifest(out, new)
    print(f"{len(objects)} object(s) reconstructed into {out}")
    return EXIT_OK if objects else EXIT_EMPTY


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    manifest = read_manifest(run_dir)
    gt_path = Path(args.gt)
    dataset = load_scan(gt_path)
    gt = load_ground_truth(gt_path, dataset.intrinsics.shape)
    tracks, recons = [], []
    for obj in manifest.objects:
        obj_dir = run_dir / Path(obj["track"]).parent
        tracks.append(read_track(obj_dir))
        recons.append(read_reconstruction(obj_dir) if "model" in obj else None)
    scene = args.scene or gt_path.name
    report = evaluate_scene(scene, tracks, recons, dataset, gt)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    table = format_table([report])
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def _bundled_scenario() -> dict[str, Any]:
    text = resources.files("interactscan").joinpath("scenarios/default.json").read_text(encoding="utf-8")
    return json.loads(text)


def cmd_simulate(args) -> int:
    if args.scenario:
        path = Path(args.scenario)
        if not path.is_file():
            raise UsageError(f"scenario file {path} does not exist")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    else:
        doc = _bundled_scenario()
    if not isinstance(doc, dict):
        raise UsageError("scenario must be a JSON object")
    if args.seed is not None:
        doc["seed"] = args.seed
    scenario = scenario_from_dict(doc)
    dataset, gt = generate_scan(scenario)
    out = Path(args.out)
    save_scan(dataset, out)
    save_ground_truth(gt, out)
    (out / "scenario.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    print(f"{len(dataset.frames)} frames written to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="interactscan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a synthetic scan with ground truth")
    sim.add_argument("scenario", nargs="?", help="scenario JSON (default: bundled three-box scene)")
    sim.add_argument("--out", required=True, help="dataset directory to write")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.set_defaults(func=cmd_simulate)

    for name, func, helptext in (
        ("pipeline", cmd_pipeline, "discover objects and reconstruct them"),
        ("discover", cmd_discover, "discover objects and write their mask tracks only"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("dataset", help="scan directory")
        p.add_argument("--out", required=True, help="run directory to write")
        p.add_argument("--config", help="pipeline configuration JSON")
        p.add_argument("--seed", type=int, default=0, help="recorded in the manifest, used by evaluate")
        p.add_argument("--threads", type=_positive_int, help="worker threads (default: all cores)")
        p.add_argument("--stride", type=_positive_int, help="override the reconstruction frame stride")
        p.add_argument("--debug", action="store_true", help="also write moving masks, trajectories and intervals")
        p.set_defaults(func=func)

    rec = sub.add_parser("reconstruct", help="reconstruct objects from a discover run")
    rec.add_argument("run", help="run directory from discover or pipeline")
    rec.add_argument("--dataset", help="scan directory (default: the one recorded in the manifest)")
    rec.add_argument("--out", help="run directory to write (default: update in place)")
    rec.add_argument("--config", help="pipeline configuration JSON (default: the manifest snapshot)")
    rec.add_argument("--seed", type=int)
    rec.add_argument("--stride", type=_positive_int)
    rec.set_defaults(func=cmd_reconstruct)

    ev = sub.add_parser("evaluate", help="score a run against simulator ground truth")
    ev.add_argument("run", help="run directory")
    ev.add_argument("gt", help="simulated dataset directory holding ground truth")
    ev.add_argument("--out", help="where to write report.json and report.txt (default: the run directory)")
    ev.add_argument("--scene", help="scene name used in the report")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage already; keep --help / --version at 0
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ScanError, UsageError, OSError, ValueError) as exc:
        print(f"interactscan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
