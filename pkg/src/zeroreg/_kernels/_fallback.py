"""Pure-NumPy implementations of the hot kernels.

These are the reference semantics; the Cython module `_core` implements the
same contracts with scalar loops. Both backends are exercised by
tests/test_kernels.py and compared by benchmarks/bench_kernels.py.
"""

import numpy as np

BACKEND = "python"


def count_inliers_batch(rotations, translations, src, dst, threshold):
    """Inlier count per hypothesis for a batch of rigid transforms.

    rotations: (B, 3, 3), translations: (B, 3), src/dst: (N, 3).
    Returns int64 counts of points with ||R p + t - q|| < threshold.
    """
    moved = np.einsum("bij,nj->bni", rotations, src) + translations[:, None, :]
    diff = moved - dst[None, :, :]
    dist2 = np.einsum("bni,bni->bn", diff, diff)
    return (dist2 < threshold * threshold).sum(axis=1).astype(np.int64)


def _logsumexp(z, axis):
    m = z.max(axis=axis, keepdims=True)
    return m + np.log(np.exp(z - m).sum(axis=axis, keepdims=True))


def sinkhorn_log(logits, iterations):
    """Log-domain alternating normalization with slack row/column exempt.

    Each iteration normalizes the non-slack rows (over all columns, slack
    included) and then the non-slack columns. The last row and column are
    never normalized themselves; they absorb unmatched mass.
    """
    z = np.array(logits, dtype=np.float64, copy=True)
    for _ in range(iterations):
        z[:-1, :] -= _logsumexp(z[:-1, :], axis=1)
        z[:, :-1] -= _logsumexp(z[:, :-1], axis=0)
    return np.exp(z)


def zbuffer_min(pixel_u, pixel_v, depths, height, width):
    """Scatter-min depth render.

    Returns (depth, owner): depth is (height, width) float64 with 0 for unhit
    pixels; owner holds the index of the winning point, -1 for unhit. Ties on
    depth resolve to the lower point index.
    """
    depth = np.zeros((height, width), dtype=np.float64)
    owner = np.full((height, width), -1, dtype=np.int64)
    if len(depths) == 0:
        return depth, owner
    flat = pixel_v.astype(np.int64) * width + pixel_u.astype(np.int64)
    idx = np.arange(len(depths), dtype=np.int64)
    order = np.lexsort((idx, depths, flat))
    flat_sorted = flat[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    winners = order[first]
    depth.ravel()[flat[winners]] = depths[winners]
    owner.ravel()[flat[winners]] = winners
    return depth, owner
