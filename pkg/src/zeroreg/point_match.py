"""Point-level matching inside matched object regions.

Builds the descriptor inner-product similarity matrix, augments it with a
slack row and column of ones, runs fixed-iteration log-domain Sinkhorn
normalization, and extracts mutual-argmax correspondences above the
superpoint threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyInputError, NumericalError, ShapeError
from .object_match import ObjectCorrespondences
from .projection import PointDescriptorCloud

SLACK_VALUE = 1.0


@dataclass
class PointCorrespondences:
    pairs: np.ndarray  # (L, 2) int64: source index, target index
    confidence: np.ndarray  # (L,) float64 in [0, 1]
    source_points: np.ndarray  # (L, 3)
    target_points: np.ndarray  # (L, 3)
    region_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.pairs.shape[0])


def similarity_matrix(desc_p, desc_q) -> np.ndarray:
    """Inner products of unit descriptor rows; entries in [-1, 1]."""
    gp = np.asarray(desc_p, dtype=np.float64)
    gq = np.asarray(desc_q, dtype=np.float64)
    if gp.ndim != 2 or gq.ndim != 2 or gp.shape[1] != gq.shape[1]:
        raise ShapeError(f"descriptor dims differ: {gp.shape} vs {gq.shape}")
    if gp.shape[0] == 0 or gq.shape[0] == 0:
        raise EmptyInputError("similarity_matrix: empty descriptor set")
    return gp @ gq.T


def augment_slack(scores) -> np.ndarray:
    """Appends one slack row and column with value 1 (corner included)."""
    s = np.asarray(scores, dtype=np.float64)
    n, m = s.shape
    out = np.full((n + 1, m + 1), SLACK_VALUE)
    out[:n, :m] = s
    return out


def strip_slack(scores) -> np.ndarray:
    return np.asarray(scores)[:-1, :-1]


def sinkhorn_normalize(augmented, iterations: int = 20, temperature: float = 0.1) -> np.ndarray:
    """Fixed-count alternating log-domain normalization of scaled logits.

    Interior entries are treated as logits scaled by 1/temperature; the slack
    row and column enter as raw logits and are exempt from normalization, so
    the slack value acts as an absolute unmatched threshold (a point whose
    best similarity falls below temperature * z drains into slack). Scaling
    the slack along with the interior would let the never-normalized slack
    row absorb all interior mass at sharp temperatures. The slack corner is
    never touched by any normalization and keeps exp(z).
    """
    s = np.asarray(augmented, dtype=np.float64)
    if iterations < 1:
        raise ValueError("sinkhorn_normalize: iterations must be >= 1")
    if temperature <= 0:
        raise ValueError("sinkhorn_normalize: temperature must be positive")
    if not np.isfinite(s).all():
        raise NumericalError("sinkhorn_normalize: non-finite input scores")
    scaled = s.copy()
    scaled[:-1, :-1] /= temperature
    return _kernels.sinkhorn_log(scaled, int(iterations))


def extract_correspondences(transport, gamma: float = 0.05) -> list[tuple[int, int, float]]:
    """Mutual-argmax pairs of the slack-stripped transport with mass >= gamma.

    Argmaxes are taken over the full matrix including slack, so a point whose
    best mass sits in the slack row/column yields no pair.
    """
    p = np.asarray(transport, dtype=np.float64)
    n, m = p.shape[0] - 1, p.shape[1] - 1
    if n < 1 or m < 1:
        return []
    row_best = p.argmax(axis=1)
    col_best = p.argmax(axis=0)
    out = []
    for i in range(n):
        j = int(row_best[i])
        if j < m and int(col_best[j]) == i and p[i, j] >= gamma:
            out.append((i, j, float(p[i, j])))
    return out


def match_region(desc_p, desc_q, iterations: int, temperature: float, gamma: float):
    sim = similarity_matrix(desc_p, desc_q)
    transport = sinkhorn_normalize(augment_slack(sim), iterations, temperature)
    return extract_correspondences(transport, gamma)


def match_points(
    regions: ObjectCorrespondences,
    source: PointDescriptorCloud,
    target: PointDescriptorCloud,
    iterations: int = 20,
    temperature: float = 0.1,
    gamma: float = 0.05,
    fallback_global: bool = True,
) -> PointCorrespondences:
    """Runs the similarity/slack/Sinkhorn/extraction chain per matched region.

    With no matched object pairs and fallback enabled, matches once globally
    over all descriptor points (region id -1).
    """
    if len(source.points) == 0 or len(target.points) == 0:
        raise EmptyInputError("match_points: empty descriptor cloud")

    tasks: list[tuple[int, np.ndarray, np.ndarray]] = []
    if regions.count == 0:
        if not fallback_global:
            raise EmptyInputError("match_points: no matched object pair and fallback disabled")
        tasks.append((-1, np.arange(len(source.points)), np.arange(len(target.points))))
    else:
        for rid, (j, k) in enumerate(regions.pairs):
            src_idx = np.nonzero(source.object_index == j)[0]
            tgt_idx = np.nonzero(target.object_index == k)[0]
            if len(src_idx) == 0 or len(tgt_idx) == 0:
                continue
            tasks.append((rid, src_idx, tgt_idx))
        if not tasks:
            if not fallback_global:
                raise EmptyInputError("match_points: matched regions hold no descriptor points")
            tasks.append((-1, np.arange(len(source.points)), np.arange(len(target.points))))

    pairs, conf, rids = [], [], []
    for rid, src_idx, tgt_idx in tasks:
        for i, j, p in match_region(
            source.descriptors[src_idx], target.descriptors[tgt_idx], iterations, temperature, gamma
        ):
            pairs.append((int(src_idx[i]), int(tgt_idx[j])))
            conf.append(p)
            rids.append(rid)

    pairs_arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return PointCorrespondences(
        pairs=pairs_arr,
        confidence=np.asarray(conf, dtype=np.float64),
        source_points=source.points[pairs_arr[:, 0]] if len(pairs) else np.zeros((0, 3)),
        target_points=target.points[pairs_arr[:, 1]] if len(pairs) else np.zeros((0, 3)),
        region_ids=np.asarray(rids, dtype=np.int64),
    )
