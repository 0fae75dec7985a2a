"""Object-level graph matching.

Minimizes ||Wp - X Wq X^T||_F^2 - <C, X> over injective assignments of the
smaller node set into the larger. Small instances are solved exactly by
enumeration; larger ones by conditional-gradient descent on the
doubly-substochastic relaxation with assignment rounding and a pairwise-swap
polish, verifiable against the exact oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .bundle import normalize_label
from .errors import ShapeError, SizeLimitError

EXACT_LIMIT = 8
ENUMERATION_CAP = 2_000_000
_ENUM_CHUNK = 65536


@dataclass
class AssignmentMatrix:
    entries: np.ndarray  # (n, m) binary
    objective: float

    def pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.entries)
        return sorted(zip(rows.tolist(), cols.tolist()))


@dataclass
class ObjectCorrespondences:
    pairs: list[tuple[int, int]]

    @property
    def count(self) -> int:
        return len(self.pairs)


def _check_shapes(Wp, Wq, C):
    Wp = np.asarray(Wp, dtype=np.float64)
    Wq = np.asarray(Wq, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if Wp.ndim != 2 or Wp.shape[0] != Wp.shape[1]:
        raise ShapeError(f"Wp must be square, got {Wp.shape}")
    if Wq.ndim != 2 or Wq.shape[0] != Wq.shape[1]:
        raise ShapeError(f"Wq must be square, got {Wq.shape}")
    if C.shape != (Wp.shape[0], Wq.shape[0]):
        raise ShapeError(f"C shape {C.shape} inconsistent with Wp {Wp.shape}, Wq {Wq.shape}")
    return Wp, Wq, C


def qap_objective(X, Wp, Wq, C) -> float:
    """||Wp - X Wq X^T||_F^2 - sum_{jk} C_jk X_jk."""
    Wp, Wq, C = _check_shapes(Wp, Wq, C)
    X = np.asarray(X, dtype=np.float64)
    if X.shape != C.shape:
        raise ShapeError(f"X shape {X.shape} does not match C {C.shape}")
    E = Wp - X @ Wq @ X.T
    return float(np.sum(E * E) - np.sum(C * X))


def _assignment_from_cols(cols: np.ndarray, n: int, m: int) -> np.ndarray:
    X = np.zeros((n, m))
    X[np.arange(n), cols] = 1.0
    return X


def _perm_count(larger: int, smaller: int) -> int:
    count = 1
    for v in range(larger, larger - smaller, -1):
        count *= v
        if count > ENUMERATION_CAP:
            return count
    return count


def solve_qap_exact(Wp, Wq, C, exact_limit: int = EXACT_LIMIT) -> AssignmentMatrix:
    """Global minimizer by exhaustive enumeration of injective assignments.

    Ties break toward the lexicographically smallest (source, target) pair
    list. Raises SizeLimitError beyond exact_limit or the enumeration cap.
    """
    Wp, Wq, C = _check_shapes(Wp, Wq, C)
    n, m = C.shape
    if min(n, m) > exact_limit:
        raise SizeLimitError(f"min(n, m) = {min(n, m)} exceeds exact_limit {exact_limit}")
    if _perm_count(max(n, m), min(n, m)) > ENUMERATION_CAP:
        raise SizeLimitError(
            f"instance {n}x{m} needs more than {ENUMERATION_CAP} enumerations"
        )

    best_obj = np.inf
    best_pairs: list[tuple[int, int]] | None = None
    source_side = n <= m
    small, large = (n, m) if source_side else (m, n)
    it = itertools.permutations(range(large), small)
    wp2 = float(np.sum(Wp * Wp))
    while True:
        chunk = np.array(list(itertools.islice(it, _ENUM_CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, small)
        if source_side:
            # full row matching: X Wq X^T equals Wq[a][:, a]
            sub = Wq[chunk[:, :, None], chunk[:, None, :]]
            E = Wp[None, :, :] - sub
            lin = C[np.arange(n)[None, :], chunk].sum(axis=1)
            obj = np.einsum("kij,kij->k", E, E) - lin
        else:
            # b maps target k to source row b_k; X Wq X^T is zero outside the
            # b x b block, whose entries are Wq permuted
            sub = Wp[chunk[:, :, None], chunk[:, None, :]]
            E = sub - Wq[None, :, :]
            lin = C[chunk, np.arange(m)[None, :]].sum(axis=1)
            obj = (
                wp2
                - np.einsum("kij,kij->k", sub, sub)
                + np.einsum("kij,kij->k", E, E)
                - lin
            )
        chunk_min = float(obj.min())
        if chunk_min > best_obj:
            continue
        tie_idx = np.nonzero(obj == chunk_min)[0]
        cand = min(_pairs_from(chunk[t], not source_side) for t in tie_idx)
        if chunk_min < best_obj or (best_pairs is not None and cand < best_pairs):
            best_obj = chunk_min
            best_pairs = cand
    assert best_pairs is not None
    X = np.zeros((n, m))
    for r, c in best_pairs:
        X[r, c] = 1.0
    return AssignmentMatrix(entries=X, objective=qap_objective(X, Wp, Wq, C))


def _pairs_from(cols: np.ndarray, transposed: bool) -> list[tuple[int, int]]:
    if transposed:
        return sorted((int(c), int(r)) for r, c in enumerate(cols))
    return [(int(r), int(c)) for r, c in enumerate(cols)]


def _fw_gradient(X, Wp, Wq, C):
    E = Wp - X @ Wq @ X.T
    return -2.0 * (E @ X @ Wq.T + E.T @ X @ Wq) - C, E


def _line_search(E, A, B, C, D):
    """Exact minimizer of the quartic f(g) = ||E - gA - g^2 B||^2 - g <C, D> on [0, 1]."""
    c4 = float(np.sum(B * B))
    c3 = 2.0 * float(np.sum(A * B))
    c2 = float(np.sum(A * A)) - 2.0 * float(np.sum(E * B))
    c1 = -2.0 * float(np.sum(E * A)) - float(np.sum(C * D))
    coeffs = np.array([4.0 * c4, 3.0 * c3, 2.0 * c2, c1])
    candidates = [0.0, 1.0]
    if np.abs(coeffs[:3]).max() > 1e-15:
        lead = np.nonzero(np.abs(coeffs) > 1e-15)[0]
        roots = np.roots(coeffs[lead[0]:]) if len(lead) else []
        candidates += [
            float(np.real(z)) for z in roots if abs(np.imag(z)) < 1e-9 and 0.0 < np.real(z) < 1.0
        ]
    vals = [c4 * g**4 + c3 * g**3 + c2 * g**2 + c1 * g for g in candidates]
    return candidates[int(np.argmin(vals))]


def _round_to_assignment(X):
    r, c = linear_sum_assignment(-X)
    out = np.zeros_like(X)
    out[r, c] = 1.0
    return out


def _polish(X, Wp, Wq, C, max_passes: int = 50):
    """2-opt over matched pairs plus moves to unused larger-side nodes."""
    n, m = X.shape
    obj = qap_objective(X, Wp, Wq, C)
    rows, cols = np.nonzero(X)
    match = dict(zip(rows.tolist(), cols.tolist()))
    for _ in range(max_passes):
        improved = False
        matched_rows = sorted(match)
        used_cols = set(match.values())
        free_cols = [c for c in range(m) if c not in used_cols]
        for ai in range(len(matched_rows)):
            for bi in range(ai + 1, len(matched_rows)):
                a, b = matched_rows[ai], matched_rows[bi]
                X2 = X.copy()
                X2[a], X2[b] = X[b].copy(), X[a].copy()
                o2 = qap_objective(X2, Wp, Wq, C)
                if o2 < obj - 1e-12:
                    X, obj = X2, o2
                    match[a], match[b] = match[b], match[a]
                    improved = True
        for a in sorted(match):
            for c in list(free_cols):
                X2 = X.copy()
                X2[a, match[a]] = 0.0
                X2[a, c] = 1.0
                o2 = qap_objective(X2, Wp, Wq, C)
                if o2 < obj - 1e-12:
                    free_cols.remove(c)
                    free_cols.append(match[a])
                    X, obj = X2, o2
                    match[a] = c
                    improved = True
        if not improved:
            break
    return X, obj


def solve_qap(
    Wp,
    Wq,
    C,
    exact_limit: int = EXACT_LIMIT,
    max_iters: int = 100,
    tol: float = 1e-8,
) -> AssignmentMatrix:
    """Exact below exact_limit; otherwise conditional-gradient with rounding.

    The relaxation runs Frank-Wolfe with linear subproblems solved by an
    assignment solver on the gradient and exact line search along each
    direction; the final iterate is rounded by one more assignment solve and
    polished with pairwise swaps. The reported objective is that of the
    rounded binary assignment.
    """
    Wp, Wq, C = _check_shapes(Wp, Wq, C)
    n, m = C.shape
    if min(n, m) <= exact_limit and _perm_count(max(n, m), min(n, m)) <= ENUMERATION_CAP:
        return solve_qap_exact(Wp, Wq, C, exact_limit=exact_limit)

    X = np.full((n, m), 1.0 / max(n, m))
    f_prev = qap_objective(X, Wp, Wq, C)
    for _ in range(max_iters):
        G, E = _fw_gradient(X, Wp, Wq, C)
        r, c = linear_sum_assignment(G)
        S = np.zeros_like(X)
        S[r, c] = 1.0
        D = S - X
        A = D @ Wq @ X.T + X @ Wq @ D.T
        B = D @ Wq @ D.T
        gamma = _line_search(E, A, B, C, D)
        if gamma <= 0.0:
            break
        X = X + gamma * D
        f = qap_objective(X, Wp, Wq, C)
        if abs(f_prev - f) < tol:
            break
        f_prev = f
    Xr = _round_to_assignment(X)
    Xr, obj = _polish(Xr, Wp, Wq, C)
    return AssignmentMatrix(entries=Xr, objective=obj)


def filter_by_category(
    assignment: AssignmentMatrix, labels_p: list[str], labels_q: list[str]
) -> ObjectCorrespondences:
    """Keeps matched pairs whose trimmed category labels are equal."""
    kept = [
        (j, k)
        for j, k in assignment.pairs()
        if normalize_label(labels_p[j]) == normalize_label(labels_q[k])
    ]
    return ObjectCorrespondences(pairs=kept)


def greedy_similarity_match(C) -> AssignmentMatrix:
    """Injective matching by descending cross-similarity, no graph structure.

    Used by the pipeline when the scene-graph stage is disabled.
    """
    C = np.asarray(C, dtype=np.float64)
    n, m = C.shape
    order = np.dstack(np.unravel_index(np.argsort(-C, axis=None, kind="stable"), C.shape))[0]
    X = np.zeros((n, m))
    used_r: set[int] = set()
    used_c: set[int] = set()
    for r, c in order:
        if r in used_r or c in used_c:
            continue
        X[r, c] = 1.0
        used_r.add(int(r))
        used_c.add(int(c))
        if len(used_r) == min(n, m):
            break
    return AssignmentMatrix(entries=X, objective=float(-np.sum(C * X)))
