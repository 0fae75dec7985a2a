import itertools

import numpy as np
import pytest

from zeroreg.errors import ShapeError, SizeLimitError
from zeroreg.graph import build_affinity, cross_similarity
from zeroreg.object_match import (
    AssignmentMatrix,
    filter_by_category,
    greedy_similarity_match,
    qap_objective,
    solve_qap,
    solve_qap_exact,
)

from conftest import unit

W2 = np.array([[0.0, 2.0], [2.0, 0.0]])
C2 = np.array([[2.0, 1.0], [1.0, 2.0]])


def brute_force_qap(Wp, Wq, C):
    """Independent oracle: plain-python enumeration with a loop objective."""
    n, m = C.shape
    best = (np.inf, None)
    if n <= m:
        cands = itertools.permutations(range(m), n)
        pair_of = lambda a: [(i, a[i]) for i in range(n)]
    else:
        cands = itertools.permutations(range(n), m)
        pair_of = lambda a: sorted((a[k], k) for k in range(m))
    for a in cands:
        X = np.zeros((n, m))
        for r, c in pair_of(a):
            X[r, c] = 1
        E = Wp - X @ Wq @ X.T
        obj = float((E * E).sum() - (C * X).sum())
        if obj < best[0] - 1e-15:
            best = (obj, pair_of(list(a)))
    return best


def test_qap_objective_identity():
    assert qap_objective(np.eye(2), W2, W2, C2) == pytest.approx(-4.0)


def test_qap_objective_swap():
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert qap_objective(X, W2, W2, C2) == pytest.approx(-2.0)


def test_qap_objective_zero_C():
    assert qap_objective(np.eye(2), W2, W2, np.zeros((2, 2))) == pytest.approx(0.0)


def test_qap_objective_shape_error():
    with pytest.raises(ShapeError):
        qap_objective(np.eye(2), W2, np.zeros((3, 3)), C2)


def test_exact_2x2():
    res = solve_qap_exact(W2, W2, C2)
    assert res.pairs() == [(0, 0), (1, 1)]
    assert res.objective == pytest.approx(-4.0)


def test_exact_rectangular_picks_max_similarity():
    C = np.array([[0.0, 5.0, 1.0]])
    res = solve_qap_exact(np.zeros((1, 1)), np.zeros((3, 3)), C)
    assert res.pairs() == [(0, 1)]


def test_exact_matches_bruteforce_oracle():
    rng = np.random.default_rng(17)
    for _ in range(40):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        Wp = rng.uniform(0, 2, size=(n, n)); np.fill_diagonal(Wp, 0)
        Wq = rng.uniform(0, 2, size=(m, m)); np.fill_diagonal(Wq, 0)
        C = rng.uniform(0, 2, size=(n, m))
        res = solve_qap_exact(Wp, Wq, C)
        ref_obj, _ = brute_force_qap(Wp, Wq, C)
        assert res.objective == pytest.approx(ref_obj, abs=1e-9)
        # feasibility: injective full matching of the smaller side
        X = res.entries
        assert (X.sum(axis=1) <= 1).all() and (X.sum(axis=0) <= 1).all()
        assert X.sum() == min(n, m)


def test_exact_size_limit():
    big = np.zeros((9, 9))
    with pytest.raises(SizeLimitError):
        solve_qap_exact(big, big, np.zeros((9, 9)))


def test_solve_qap_delegates_small():
    rng = np.random.default_rng(23)
    Wp = rng.uniform(0, 2, size=(4, 4)); np.fill_diagonal(Wp, 0)
    Wq = rng.uniform(0, 2, size=(5, 5)); np.fill_diagonal(Wq, 0)
    C = rng.uniform(0, 2, size=(4, 5))
    a = solve_qap(Wp, Wq, C)
    b = solve_qap_exact(Wp, Wq, C)
    assert a.pairs() == b.pairs()
    assert a.objective == pytest.approx(b.objective)


def test_solve_qap_linear_reduction():
    # with zero structure matrices the QAP reduces to linear assignment on C
    rng = np.random.default_rng(5)
    n = 12
    gt = rng.permutation(n)
    C = np.zeros((n, n))
    C[np.arange(n), gt] = 100.0
    res = solve_qap(np.zeros((n, n)), np.zeros((n, n)), C)
    assert res.pairs() == sorted(zip(range(n), gt.tolist()))


def _planted_instance(rng, m=12, sigma=0.05, categories=6):
    cent_q = rng.uniform(0, 4, size=(m, 3))
    protos = unit(rng.normal(size=(categories, 32)))
    cat = rng.integers(0, categories, size=m)
    sem_q = unit(protos[cat] + sigma * rng.normal(size=(m, 32)))
    perm = rng.permutation(m)
    cent_p = cent_q[perm]
    sem_p = unit(protos[cat[perm]] + sigma * rng.normal(size=(m, 32)))
    Wp = build_affinity(cent_p, sem_p, k=3)
    Wq = build_affinity(cent_q, sem_q, k=3)
    C = cross_similarity(sem_p, sem_q)
    Xgt = np.zeros((m, m))
    Xgt[np.arange(m), perm] = 1.0
    return Wp, Wq, C, Xgt


def test_solve_qap_planted_12x12():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(20):
        Wp, Wq, C, Xgt = _planted_instance(rng)
        planted = qap_objective(Xgt, Wp, Wq, C)
        res = solve_qap(Wp, Wq, C)
        if res.objective <= planted + 0.05 * abs(planted):
            hits += 1
    assert hits >= 18


def test_objective_lower_bound():
    rng = np.random.default_rng(31)
    Wp = rng.uniform(0, 2, size=(4, 4))
    Wq = rng.uniform(0, 2, size=(4, 4))
    C = rng.uniform(0, 2, size=(4, 4))
    bound = -C.max(axis=1).sum()
    for perm in itertools.permutations(range(4)):
        X = np.zeros((4, 4))
        X[np.arange(4), perm] = 1
        assert qap_objective(X, Wp, Wq, C) >= bound - 1e-12


def test_permutation_equivariance():
    # relabeling source nodes by P maps the optimum X* to P X* and keeps the value
    rng = np.random.default_rng(13)
    n = 5
    Wp = rng.uniform(0, 2, size=(n, n)); np.fill_diagonal(Wp, 0)
    Wq = rng.uniform(0, 2, size=(n, n)); np.fill_diagonal(Wq, 0)
    C = rng.uniform(0, 2, size=(n, n))
    res = solve_qap_exact(Wp, Wq, C)
    perm = rng.permutation(n)
    P = np.zeros((n, n)); P[perm, np.arange(n)] = 1.0  # row i of P@X is row perm^-1... use X' = P X
    res_p = solve_qap_exact(P @ Wp @ P.T, Wq, P @ C)
    assert res_p.objective == pytest.approx(res.objective, abs=1e-9)
    np.testing.assert_array_equal(res_p.entries, P @ res.entries)


def test_planted_permutation_zero_objective():
    rng = np.random.default_rng(41)
    m = 6
    Wq = rng.uniform(0.1, 2, size=(m, m))
    Wq = np.triu(Wq, 1); Wq = Wq + Wq.T  # distinct symmetric edge weights
    perm = rng.permutation(m)
    P = np.zeros((m, m)); P[np.arange(m), perm] = 1.0
    Wp = P @ Wq @ P.T
    res = solve_qap_exact(Wp, Wq, np.zeros((m, m)))
    assert res.objective == pytest.approx(0.0, abs=1e-12)


def test_filter_by_category():
    X = np.eye(2)
    am = AssignmentMatrix(entries=X, objective=0.0)
    kept = filter_by_category(am, ["chair", "chair"], ["chair", "table"])
    assert kept.pairs == [(0, 0)]
    all_bad = filter_by_category(am, ["chair", "chair"], ["table", "sofa"])
    assert all_bad.pairs == [] and all_bad.count == 0


def test_filter_by_category_trims_whitespace():
    am = AssignmentMatrix(entries=np.eye(1), objective=0.0)
    assert filter_by_category(am, [" chair "], ["chair"]).pairs == [(0, 0)]


def test_greedy_similarity_match_injective():
    C = np.array([[0.9, 0.8], [0.85, 0.7]])
    res = greedy_similarity_match(C)
    assert res.pairs() == [(0, 0), (1, 1)]
    assert (res.entries.sum(axis=0) <= 1).all() and (res.entries.sum(axis=1) <= 1).all()
