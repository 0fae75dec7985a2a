"""Registration evaluation metrics: RMSE recall, inlier ratio, RE/TE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError
from .registration import RigidTransform

RMSE_SUCCESS_THRESHOLD = 0.2  # meters
INLIER_TAU = 0.1  # meters

RE_ACC_THRESHOLDS = (5.0, 10.0, 45.0)  # degrees
TE_ACC_THRESHOLDS = (0.05, 0.10, 0.25)  # meters


@dataclass
class PairEvaluation:
    rmse: float
    registered: bool
    inlier_ratio: float
    rotation_error: float  # degrees
    translation_error: float  # meters


def rmse(t_est: RigidTransform, t_gt: RigidTransform, overlap_points) -> float:
    pts = np.asarray(overlap_points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyInputError("rmse: empty overlap point set")
    diff = t_est.apply(pts) - t_gt.apply(pts)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def registration_recall(evaluations) -> float:
    evals = list(evaluations)
    if not evals:
        raise EmptyInputError("registration_recall: no evaluations")
    return sum(1 for e in evals if e.registered) / len(evals)


def inlier_ratio(correspondences, t_gt: RigidTransform, tau: float = INLIER_TAU) -> float:
    """Fraction of predicted pairs with ||T_gt(p) - q|| < tau."""
    src = np.asarray(correspondences.source_points, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(correspondences.target_points, dtype=np.float64).reshape(-1, 3)
    if len(src) == 0:
        raise EmptyInputError("inlier_ratio: no correspondences")
    d = np.linalg.norm(t_gt.apply(src) - dst, axis=1)
    return float((d < tau).mean())


def rotation_translation_error(t_est: RigidTransform, t_gt: RigidTransform) -> tuple[float, float]:
    """(geodesic rotation error in degrees, translation error in meters)."""
    tr = float(np.trace(t_gt.rotation.T @ t_est.rotation))
    angle = np.degrees(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))
    te = float(np.linalg.norm(t_est.translation - t_gt.translation))
    return float(angle), te


def accuracy_at(values, thresholds) -> dict[str, float]:
    vals = np.asarray(list(values), dtype=np.float64)
    if len(vals) == 0:
        return {_fmt(t): 0.0 for t in thresholds}
    return {_fmt(t): float((vals < t).mean()) for t in thresholds}


def _fmt(threshold: float) -> str:
    return f"{threshold:g}"


def evaluate_pair(
    t_est: RigidTransform,
    t_gt: RigidTransform,
    overlap_points,
    correspondences=None,
    rmse_threshold: float = RMSE_SUCCESS_THRESHOLD,
    tau: float = INLIER_TAU,
) -> PairEvaluation:
    err = rmse(t_est, t_gt, overlap_points)
    re_deg, te_m = rotation_translation_error(t_est, t_gt)
    ir = 0.0
    if correspondences is not None and len(correspondences) > 0:
        ir = inlier_ratio(correspondences, t_gt, tau)
    return PairEvaluation(
        rmse=err,
        registered=bool(err < rmse_threshold),
        inlier_ratio=ir,
        rotation_error=re_deg,
        translation_error=te_m,
    )


def summarize(evaluations, failures: int = 0) -> dict:
    """Aggregate summary over successful pairs; failures only grow the denominator."""
    evals = list(evaluations)
    total = len(evals) + failures
    if total == 0:
        raise EmptyInputError("summarize: no pairs")
    registered = sum(1 for e in evals if e.registered)
    res = [e.rotation_error for e in evals]
    tes = [e.translation_error for e in evals]
    irs = [e.inlier_ratio for e in evals]
    return {
        "rr": registered / total,
        "mean_ir": float(np.mean(irs)) if irs else 0.0,
        "re_mean": float(np.mean(res)) if res else 0.0,
        "re_median": float(np.median(res)) if res else 0.0,
        "te_mean": float(np.mean(tes)) if tes else 0.0,
        "te_median": float(np.median(tes)) if tes else 0.0,
        "acc_at": {
            "re_deg": accuracy_at(res, RE_ACC_THRESHOLDS),
            "te_m": accuracy_at(tes, TE_ACC_THRESHOLDS),
        },
        "pairs": total,
        "failures": failures,
    }
