"""Place-recognition and metric-localization metrics, stability ratio and PR-curve output."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import RigidTransform, pose_errors
from .pipeline import LocalizationResult

TP_DISTANCE = 5.0
STABILITY_EPS = 1e-6


@dataclass(frozen=True)
class EvalRecord:
    """One query's outcome with the ground truth needed to grade it.

    ``scene_pose`` is the world pose of the scene the pipeline selected and
    ``nearest_db_distance`` the horizontal distance from the query to the
    closest database scene (``None`` assumes a positive exists).
    """

    query_id: int
    query_pose: RigidTransform
    result: LocalizationResult
    true_positive_distance: float = TP_DISTANCE
    scene_pose: Optional[RigidTransform] = None
    nearest_db_distance: Optional[float] = None

    def __post_init__(self):
        if not self.true_positive_distance > 0:
            raise ValueError("true_positive_distance must be positive")
        if self.result.best_scene_id is not None and self.scene_pose is None:
            raise ValueError("scene_pose required for a retrieved scene")

    @property
    def has_positive(self) -> bool:
        return self.nearest_db_distance is None or self.nearest_db_distance <= self.true_positive_distance

    @property
    def retrieved(self) -> bool:
        return self.result.best_scene_id is not None

    @property
    def correct(self) -> bool:
        if not self.retrieved:
            return False
        d = self.scene_pose.translation[:2] - self.query_pose.translation[:2]
        return float(np.hypot(*d)) <= self.true_positive_distance

    def ground_truth(self) -> RigidTransform:
        """Query-to-scene transform implied by the world poses."""
        return self.scene_pose.inverse() @ self.query_pose


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    threshold: float


@dataclass(frozen=True)
class MetricsReport:
    recall_at_1: Optional[float]
    max_recall_at_full_precision: Optional[float]
    max_f1: Optional[float]
    auc_pr: Optional[float]
    recall_at_50cm: Optional[float]
    success_rate: Optional[float]
    ate_m: Optional[float]
    are_deg: Optional[float]
    n_queries: int
    recall_at_50cm_2d: Optional[float] = None
    success_rate_2d: Optional[float] = None
    ate_2d_m: Optional[float] = None
    are_2d_deg: Optional[float] = None
    true_positive_distance: float = TP_DISTANCE

    def rows(self) -> List[Tuple[str, Optional[float]]]:
        return [("R@1", self.recall_at_1), ("MR", self.max_recall_at_full_precision), ("MF1", self.max_f1),
                ("AUC", self.auc_pr), ("R@50", self.recall_at_50cm), ("SR", self.success_rate),
                ("ATE_m", self.ate_m), ("ARE_deg", self.are_deg), ("R@50_2d", self.recall_at_50cm_2d),
                ("SR_2d", self.success_rate_2d), ("ATE_2d_m", self.ate_2d_m), ("ARE_2d_deg", self.are_2d_deg)]


def _sorted(records: Sequence[EvalRecord]) -> List[EvalRecord]:
    return sorted(records, key=lambda r: r.query_id)


def pr_curve(records: Sequence[EvalRecord]) -> List[PRPoint]:
    """Precision/recall at every unique overlap score, highest threshold first."""
    recs = _sorted(records)
    n_pos = sum(r.has_positive for r in recs)
    if n_pos == 0:
        return []
    hits = [(r.result.overlap, r.correct) for r in recs if r.retrieved]
    scores = np.array([s for s, _ in hits], float)
    labels = np.array([c for _, c in hits], bool)
    out = []
    for t in sorted(set(scores.tolist()), reverse=True):
        sel = scores >= t
        tp = int(np.sum(labels & sel))
        fp = int(np.sum(~labels & sel))
        out.append(PRPoint(tp / n_pos, tp / (tp + fp), t))
    return out


def compute_pr_metrics(records: Sequence[EvalRecord]):
    """``(R@1, MR, MF1, AUC, curve)``; all metrics ``None`` when no query has a positive."""
    recs = _sorted(records)
    n_pos = sum(r.has_positive for r in recs)
    if n_pos == 0:
        return None, None, None, None, []
    r1 = sum(r.correct for r in recs if r.has_positive) / n_pos
    curve = pr_curve(recs)
    mr = max([p.recall for p in curve if p.precision == 1.0], default=0.0)
    f1 = [2 * p.precision * p.recall / (p.precision + p.recall) for p in curve if p.precision + p.recall > 0]
    mf1 = max(f1, default=0.0)
    # the curve starts at (recall 0, precision 1) so perfect retrieval integrates to 1
    rec = np.array([0.0] + [p.recall for p in curve])
    prec = np.array([1.0] + [p.precision for p in curve])
    auc = float(np.sum(np.diff(rec) * (prec[1:] + prec[:-1]) / 2))
    return r1, mr, mf1, auc, curve


def compute_pose_metrics(records: Sequence[EvalRecord], trans_tol: float = 0.5, rot_tol: float = 5.0) -> dict:
    """R@50, SR, ATE and ARE in 3D and in the planar (x, y, yaw) variant."""
    recs = _sorted(records)
    n_pos = sum(r.has_positive for r in recs)
    keys = ("recall_at_50cm", "success_rate", "ate_m", "are_deg",
            "recall_at_50cm_2d", "success_rate_2d", "ate_2d_m", "are_2d_deg")
    if n_pos == 0:
        return dict.fromkeys(keys)
    ok3, ok2, sr3, sr2 = 0, 0, [], []
    for r in recs:
        if not r.retrieved:
            continue
        t3, a3, t2, a2 = pose_errors(r.result.transform, r.ground_truth())
        a3, a2 = math.degrees(a3), math.degrees(a2)
        good3 = t3 <= trans_tol and a3 <= rot_tol
        good2 = t2 <= trans_tol and a2 <= rot_tol
        ok3 += good3
        ok2 += good2
        if r.correct and good3:
            sr3.append((t3, a3))
        if r.correct and good2:
            sr2.append((t2, a2))

    def mean(xs, i):
        return float(np.mean([x[i] for x in xs])) if xs else None

    return dict(zip(keys, (ok3 / n_pos, len(sr3) / n_pos, mean(sr3, 0), mean(sr3, 1),
                           ok2 / n_pos, len(sr2) / n_pos, mean(sr2, 0), mean(sr2, 1))))


def evaluate(records: Sequence[EvalRecord], trans_tol: float = 0.5, rot_tol: float = 5.0) -> MetricsReport:
    r1, mr, mf1, auc, _ = compute_pr_metrics(records)
    pose = compute_pose_metrics(records, trans_tol, rot_tol)
    tp = records[0].true_positive_distance if records else TP_DISTANCE
    return MetricsReport(r1, mr, mf1, auc, n_queries=len(records), true_positive_distance=tp, **pose)


def threshold_sweep(records: Sequence[EvalRecord], thresholds: Sequence[float]) -> List[MetricsReport]:
    th = [float(t) for t in thresholds]
    if any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
        raise ValueError("thresholds must be positive and strictly ascending")
    return [evaluate([replace(r, true_positive_distance=t) for r in records]) for t in th]


def stability_ratio(values: Sequence[float], epsilon: float = STABILITY_EPS) -> Optional[float]:
    """``log10(mean / (std + epsilon))`` with the population standard deviation."""
    v = np.asarray(values, float)
    if len(v) < 2:
        raise ValueError("stability ratio needs at least two values")
    mu = float(v.mean())
    if mu <= 0:
        return None
    return math.log10(mu / (float(v.std()) + epsilon))


def format_pr_csv(curve: Sequence[PRPoint]) -> str:
    return "recall,precision,threshold\n" + "".join(
        f"{p.recall!r},{p.precision!r},{p.threshold!r}\n" for p in curve)


def format_report(rep: MetricsReport) -> str:
    lines = [f"n_queries {rep.n_queries}", f"tp_distance_m {rep.true_positive_distance!r}"]
    for name, v in rep.rows():
        lines.append(f"{name} {'NA' if v is None else format(v, '.6f')}")
    return "\n".join(lines) + "\n"
