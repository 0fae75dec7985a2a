"""Rigid-transform estimation: closed-form least-squares fit and RANSAC.

The fit subtracts centroids and decomposes the cross-covariance, correcting
reflections so det(R) = +1. RANSAC draws 3-point samples from a counter-based
generator (hypothesis i is a pure function of seed and i), scores hypotheses
in batches through the kernel backend, and refits on the final inlier set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateConfigError, InsufficientDataError, NoConsensusError

_DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray  # (3, 3) proper orthonormal
    translation: np.ndarray  # (3,)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(rotation=np.eye(3), translation=np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self ∘ other)(p) = R_s (R_o p + t_o) + t_s."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rotation=rt, translation=-rt @ self.translation)

    def to_row12(self) -> list[float]:
        """Row-major [R | t] as 12 values."""
        out = np.hstack([self.rotation, self.translation.reshape(3, 1)])
        return [float(v) for v in out.reshape(-1)]

    @staticmethod
    def from_row12(values) -> "RigidTransform":
        arr = np.asarray(values, dtype=np.float64).reshape(3, 4)
        return RigidTransform(rotation=arr[:, :3].copy(), translation=arr[:, 3].copy())


@dataclass
class RansacConfig:
    max_iterations: int = 50_000
    inlier_threshold: float = 0.05
    confidence: float = 0.999
    seed: int = 0
    batch_size: int = 512


@dataclass
class RansacResult:
    transform: RigidTransform
    inlier_indices: np.ndarray
    iterations_run: int


def apply_transform(transform: RigidTransform, points) -> np.ndarray:
    return transform.apply(points)


def fit_rigid(source, target) -> RigidTransform:
    """Least-squares R, t minimizing sum ||R p + t - q||^2 (Kabsch)."""
    p = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    q = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if p.shape != q.shape:
        raise InsufficientDataError(f"pair arrays differ in shape: {p.shape} vs {q.shape}")
    if p.shape[0] < 3:
        raise InsufficientDataError(f"need at least 3 pairs, got {p.shape[0]}")
    pc = p - p.mean(axis=0)
    qc = q - q.mean(axis=0)
    spread = np.linalg.svd(pc, compute_uv=False)
    if spread[1] <= _DEGENERATE_TOL * max(spread[0], 1.0):
        raise DegenerateConfigError("source points are collinear or coincident")
    M = qc.T @ pc
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    R = U @ np.diag([1.0, 1.0, d]) @ Vt
    t = q.mean(axis=0) - R @ p.mean(axis=0)
    return RigidTransform(rotation=R, translation=t)


def _distinct_triples(seed: int, count: int, n: int) -> np.ndarray:
    """count x 3 distinct index triples; row i depends only on (seed, i)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    a = rng.integers(0, n, size=count)
    b = rng.integers(0, n - 1, size=count)
    c = rng.integers(0, n - 2, size=count)
    b = b + (b >= a)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    c = c + (c >= lo)
    c = c + (c >= hi)
    return np.stack([a, b, c], axis=1)


def _fit_batch(p, q):
    """Kabsch over a batch of 3-point samples: p, q are (B, 3, 3)."""
    pc = p - p.mean(axis=1, keepdims=True)
    qc = q - q.mean(axis=1, keepdims=True)
    M = np.einsum("bij,bik->bjk", qc, pc)
    U, S, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    corr = np.repeat(np.eye(3)[None, :, :], len(p), axis=0)
    corr[:, 2, 2] = d
    R = U @ corr @ Vt
    t = q.mean(axis=1) - np.einsum("bij,bj->bi", R, p.mean(axis=1))
    # rank-deficient samples (collinear triples) produce unreliable rotations
    spread = np.linalg.svd(pc, compute_uv=False)
    valid = spread[:, 1] > _DEGENERATE_TOL * np.maximum(spread[:, 0], 1.0)
    return R, t, valid


def _residuals(transform: RigidTransform, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return np.linalg.norm(transform.apply(src) - dst, axis=1)


def _required_iterations(inlier_ratio: float, confidence: float) -> int:
    if inlier_ratio <= 0.0:
        return np.iinfo(np.int64).max
    good = inlier_ratio**3
    if good >= 1.0:
        return 1
    denom = np.log1p(-good)
    if denom >= 0.0:
        return np.iinfo(np.int64).max
    return int(np.ceil(np.log(1.0 - confidence) / denom))


def ransac_register(correspondences, config: RansacConfig | None = None) -> RansacResult:
    """Max-consensus rigid transform from point correspondences.

    Deterministic for a given seed; ties on inlier count resolve to the
    lowest hypothesis index. Exits early once the best inlier ratio implies
    the configured confidence.
    """
    cfg = config or RansacConfig()
    src = np.asarray(correspondences.source_points, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(correspondences.target_points, dtype=np.float64).reshape(-1, 3)
    n = len(src)
    if n < 3:
        raise InsufficientDataError(f"RANSAC needs >= 3 correspondences, got {n}")

    triples = _distinct_triples(cfg.seed, cfg.max_iterations, n)
    best_count = -1
    best_R = None
    best_t = None
    done = 0
    required = cfg.max_iterations
    while done < min(required, cfg.max_iterations):
        batch = triples[done : min(done + cfg.batch_size, cfg.max_iterations)]
        R, t, valid = _fit_batch(src[batch], dst[batch])
        counts = _kernels.count_inliers_batch(
            np.ascontiguousarray(R), np.ascontiguousarray(t), src, dst, cfg.inlier_threshold
        )
        counts = np.where(valid, counts, -1)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count = int(counts[k])
            best_R, best_t = R[k], t[k]
            required = _required_iterations(best_count / n, cfg.confidence)
        done += len(batch)

    if best_R is None or best_count <= 0:
        raise NoConsensusError("no RANSAC hypothesis gathered any inliers")
    transform = RigidTransform(rotation=best_R, translation=best_t)
    inliers = np.nonzero(_residuals(transform, src, dst) < cfg.inlier_threshold)[0]
    if len(inliers) >= 3:
        try:
            refit = fit_rigid(src[inliers], dst[inliers])
            refit_inliers = np.nonzero(_residuals(refit, src, dst) < cfg.inlier_threshold)[0]
            if len(refit_inliers) >= len(inliers):
                transform, inliers = refit, refit_inliers
        except DegenerateConfigError:
            pass
    if len(inliers) == 0:
        raise NoConsensusError("best RANSAC model has zero inliers")
    return RansacResult(transform=transform, inlier_indices=inliers, iterations_run=done)
