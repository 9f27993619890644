"""Detection and reconstruction scoring against simulator ground truth."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset_io import GroundTruth, GroundTruthObject, ScanDataset
from .errors import EmptyCloudError
from .geometry import IcpParams, PointCloud, RigidTransform, chamfer_distance, icp_align
from .reconstruction import ObjectReconstruction
from .selection import MaskTrack

MATCH_MIN_SCORE = 0.3
DEFAULT_SAMPLES = 10_000
EVAL_ICP = IcpParams(max_iterations=100, convergence_tol=1e-9, max_correspondence_dist=0.02)


@dataclass
class Matching:
    pairs: list[tuple[int, int, float]]  # (detection index, gt object id, score)
    n_detections: int
    gt_ids: list[int]

    @property
    def true_positives(self) -> int:
        return len(self.pairs)

    @property
    def false_positives(self) -> int:
        return self.n_detections - len(self.pairs)

    @property
    def false_negatives(self) -> int:
        return len(self.gt_ids) - len(self.pairs)


def _track_gt_score(track: MaskTrack, gt: GroundTruth, obj_index: int, interval: tuple[int, int]) -> float:
    s, e = interval
    det = track.masks[s : e + 1].reshape(e - s + 1, -1)
    ref = (gt.labels[s : e + 1] == obj_index + 1).reshape(e - s + 1, -1)
    inter = np.count_nonzero(det & ref, axis=1)
    union = np.count_nonzero(det | ref, axis=1)
    iou = np.divide(inter, union, out=np.zeros(len(inter)), where=union > 0)
    return float(np.mean(iou))


def match_detections(detections: Sequence[MaskTrack], gt: GroundTruth) -> Matching:
    """Greedy one-to-one matching on mean mask IoU over each GT interaction interval."""
    manipulated = [(i, o) for i, o in enumerate(gt.objects) if o.interval is not None]
    scored = []
    for d, track in enumerate(detections):
        for i, obj in manipulated:
            scored.append((_track_gt_score(track, gt, i, obj.interval), d, obj.object_id))
    scored.sort(key=lambda s: (-s[0], s[1], s[2]))
    used_det, used_gt, pairs = set(), set(), []
    for score, d, g in scored:
        if score < MATCH_MIN_SCORE:
            break
        if d in used_det or g in used_gt:
            continue
        used_det.add(d)
        used_gt.add(g)
        pairs.append((d, g, score))
    pairs.sort()
    return Matching(pairs=pairs, n_detections=len(detections), gt_ids=[o.object_id for _, o in manipulated])


def compute_precision_recall(matching: Matching) -> tuple[float, float]:
    tp, fp, fn = matching.true_positives, matching.false_positives, matching.false_negatives
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall


def _subsample(points: np.ndarray, samples: int, rng: np.random.Generator) -> np.ndarray:
    if len(points) <= samples:
        return points
    return points[np.sort(rng.choice(len(points), size=samples, replace=False))]


def evaluate_reconstruction(
    recon: ObjectReconstruction | PointCloud,
    gt_surface: PointCloud,
    gt_pose: RigidTransform,
    icp: IcpParams | None = EVAL_ICP,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> float:
    """Chamfer distance between the model and the GT surface after ICP refinement.

    ``gt_pose`` carries ``gt_surface`` into the model's object frame and
    serves as the initial alignment. ``icp=None`` skips refinement.
    """
    model = recon.model if isinstance(recon, ObjectReconstruction) else recon
    if len(model) == 0 or len(gt_surface) == 0:
        raise EmptyCloudError("reconstruction and ground truth must be non-empty")
    rng = np.random.default_rng(seed)
    target = _subsample(gt_pose.apply(gt_surface.points), samples, rng)
    source = _subsample(model.points, samples, rng)
    if icp is not None:
        transform, _ = icp_align(source, target, icp, RigidTransform.identity())
        source = transform.apply(source)
    return chamfer_distance(source, target)


def gt_pose_in_object_frame(obj: GroundTruthObject, dataset: ScanDataset, best_frame: int) -> RigidTransform:
    """Maps the stored world-frame surface samples into the camera frame of ``best_frame``."""
    cam = dataset.frames[best_frame].pose
    return cam.inverse() @ obj.poses[best_frame] @ obj.poses[0].inverse()


@dataclass
class EvaluationReport:
    scene: str
    n_detections: int
    gt_ids: list[int]
    pairs: list[tuple[int, int, float]]
    chamfer: dict[int, float] = field(default_factory=dict)  # gt object id -> meters

    @property
    def matching(self) -> Matching:
        return Matching(pairs=list(self.pairs), n_detections=self.n_detections, gt_ids=list(self.gt_ids))

    @property
    def true_positives(self) -> int:
        return self.matching.true_positives

    @property
    def false_positives(self) -> int:
        return self.matching.false_positives

    @property
    def false_negatives(self) -> int:
        return self.matching.false_negatives

    @property
    def precision(self) -> float:
        return compute_precision_recall(self.matching)[0]

    @property
    def recall(self) -> float:
        return compute_precision_recall(self.matching)[1]

    @property
    def mean_chamfer(self) -> float:
        return float(np.mean(list(self.chamfer.values()))) if self.chamfer else math.nan

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "n_detections": self.n_detections,
            "gt_ids": self.gt_ids,
            "pairs": [list(p) for p in self.pairs],
            "chamfer": {str(k): v for k, v in self.chamfer.items()},
            "summary": {
                "true_positives": self.true_positives,
                "false_positives": self.false_positives,
                "false_negatives": self.false_negatives,
                "precision": self.precision,
                "recall": self.recall,
                "mean_chamfer": None if math.isnan(self.mean_chamfer) else self.mean_chamfer,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> EvaluationReport:
        # the summary block is derived; it is recomputed, never read back
        return cls(
            scene=doc["scene"],
            n_detections=int(doc["n_detections"]),
            gt_ids=[int(g) for g in doc["gt_ids"]],
            pairs=[(int(d), int(g), float(s)) for d, g, s in doc["pairs"]],
            chamfer={int(k): float(v) for k, v in doc["chamfer"].items()},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> EvaluationReport:
        return cls.from_dict(json.loads(text))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvaluationReport):
            return NotImplemented
        return asdict(self) == asdict(other)


def format_table(reports: Sequence[EvaluationReport]) -> str:
    """Aligned text table: one column per scene plus the mean."""
    header = ["metric"] + [r.scene for r in reports] + ["Mean"]

    def row(name, values, fmt):
        finite = [v for v in values if not math.isnan(v)]
        mean = sum(finite) / len(finite) if finite else math.nan
        cells = ["n/a" if math.isnan(v) else fmt(v) for v in values + [mean]]
        return [name] + cells

    rows = [
        header,
        row("mean chamfer distance (cm)", [r.mean_chamfer * 100 for r in reports], lambda v: f"{v:.2f}"),
        row("false positives", [float(r.false_positives) for r in reports], lambda v: f"{v:.1f}"),
        row("precision", [r.precision * 100 for r in reports], lambda v: f"{v:.1f}%"),
        row("recall", [r.recall * 100 for r in reports], lambda v: f"{v:.1f}%"),
    ]
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def evaluate_scene(
    scene: str,
    tracks: Sequence[MaskTrack],
    reconstructions: Sequence[ObjectReconstruction | None],
    dataset: ScanDataset,
    gt: GroundTruth,
    samples: int = DEFAULT_SAMPLES,
    icp: IcpParams | None = EVAL_ICP,
) -> EvaluationReport:
    matching = match_detections(tracks, gt)
    by_id = {o.object_id: o for o in gt.objects}
    chamfer = {}
    for d, g, _ in matching.pairs:
        recon = reconstructions[d]
        if recon is None:
            continue
        pose = gt_pose_in_object_frame(by_id[g], dataset, recon.best_frame)
        chamfer[g] = evaluate_reconstruction(recon, by_id[g].surface, pose, icp, samples)
    return EvaluationReport(
        scene=scene,
        n_detections=matching.n_detections,
        gt_ids=matching.gt_ids,
        pairs=matching.pairs,
        chamfer=chamfer,
    )
