"""Object scene graphs: centroid nodes, kNN affinity with semantic edge
weights, and the cross-graph node similarity matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ZeroVectorError
from .projection import MaskedPointCloud


@dataclass
class SceneGraphRep:
    centroids: np.ndarray  # (n, 3)
    affinity: np.ndarray  # (n, n), entries in {0} U [0, 2]
    node_semantics: np.ndarray  # (n, d)
    node_labels: list[str]
    k: int


def centroid(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise EmptyInputError("centroid: empty point set")
    return pts.mean(axis=0)


def _unit_rows(vectors: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(v, axis=1)
    bad = np.nonzero(norms == 0)[0]
    if len(bad):
        raise ZeroVectorError(f"{what}: zero-norm vector at node {int(bad[0])}")
    return v / norms[:, None]


def build_affinity(centroids, semantics, k: int = 3, symmetric: bool = True) -> np.ndarray:
    """Edge weight 1 + cos(s_j, s_k) for the k nearest centroids of each node.

    Ties at equal distance resolve to the lower node index. With
    symmetric=True the matrix is W = max(W, W^T); the diagonal is always 0.
    """
    cent = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
    n = cent.shape[0]
    if n == 0:
        raise EmptyInputError("build_affinity: no nodes")
    if k < 1:
        raise ValueError("build_affinity: k must be >= 1")
    W = np.zeros((n, n))
    kk = min(k, n - 1)
    if kk == 0:
        return W
    sem = _unit_rows(semantics, "build_affinity")
    cos = sem @ sem.T
    diff = cent[:, None, :] - cent[None, :, :]
    dist = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist, np.inf)
    for j in range(n):
        nbrs = np.argsort(dist[j], kind="stable")[:kk]
        W[j, nbrs] = 1.0 + cos[j, nbrs]
    if symmetric:
        W = np.maximum(W, W.T)
    np.fill_diagonal(W, 0.0)
    return W


def cross_similarity(semantics_p, semantics_q) -> np.ndarray:
    """Entry (j, k) = 1 + cos(s^p_j, s^q_k); all entries in [0, 2]."""
    sp = np.asarray(semantics_p, dtype=np.float64)
    sq = np.asarray(semantics_q, dtype=np.float64)
    if sp.shape[1] != sq.shape[1]:
        raise ValueError(f"cross_similarity: dims differ ({sp.shape[1]} vs {sq.shape[1]})")
    return 1.0 + _unit_rows(sp, "cross_similarity(P)") @ _unit_rows(sq, "cross_similarity(Q)").T


def build_scene_graph(cloud: MaskedPointCloud, k: int = 3, symmetric: bool = True) -> SceneGraphRep:
    cents = np.stack([centroid(cloud.all_points[r.point_indices]) for r in cloud.objects])
    sems = np.stack([np.asarray(r.semantic, dtype=np.float64) for r in cloud.objects])
    labels = [r.category_label for r in cloud.objects]
    return SceneGraphRep(
        centroids=cents,
        affinity=build_affinity(cents, sems, k=k, symmetric=symmetric),
        node_semantics=sems,
        node_labels=labels,
        k=k,
    )
