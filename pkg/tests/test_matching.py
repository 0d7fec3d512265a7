import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from oracles import best_assignment_cost
from treeloc.config import MatchConfig
from treeloc.geometry import rot_2d
from treeloc.matching import (TrianglePair, assign_bucket, dbh_cost_matrix, dbh_filter, match_triangle_arrays,
                              triangle_yaw, vote, vote_groups, with_yaw, yaw_batch, yaw_vote)
from treeloc.triangles import TriangleEntry, triangle_arrays

TRI = np.array([[0.0, 0.0], [4.0, 0.5], [1.0, 3.0]])


def entry(dbhs=(0.3, 0.3, 0.3), verts=TRI, h=1):
    return TriangleEntry(h, (1.0, 2.0, 2.5), 1.0, tuple(dbhs), ((0, 0, 1),) * 3, (0, 0, 0), (0, 1, 2),
                         tuple(np.mean(verts, axis=0)), 0, tuple(map(tuple, verts)))


def test_identical_singleton_bucket():
    [p] = dbh_filter([entry()], [entry()])
    assert p.dbh_cost == 0.0


def test_two_to_one_bucket_picks_the_close_query():
    q = [entry((0.3,) * 3), entry((0.5,) * 3)]
    c = [entry((0.31,) * 3)]
    [p] = dbh_filter(q, c, MatchConfig(tau_dbh=0.05))
    assert p.query is q[0] and math.isclose(p.dbh_cost, 0.03)


def test_threshold_rejection():
    assert dbh_filter([entry((0.3,) * 3)], [entry((0.45,) * 3)]) == []


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_assignment_optimal_and_one_to_one(m, n, seed):
    r = np.random.default_rng(seed)
    dq, dc = r.uniform(0.1, 0.6, (m, 3)), r.uniform(0.1, 0.6, (n, 3))
    cost, _ = dbh_cost_matrix(dq, dc)
    rows_cols = assign_bucket(dq, dc, tau_dbh=10.0)
    assert len(rows_cols) == min(m, n)
    assert len({r for r, _, _ in rows_cols}) == len({c for _, c, _ in rows_cols}) == len(rows_cols)
    assert math.isclose(sum(c for _, _, c in rows_cols), best_assignment_cost(cost.tolist()), abs_tol=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(-20, 20), st.floats(-20, 20))
def test_yaw_of_exact_rotation(th, tx, ty):
    moved = TRI @ rot_2d(th).T + (tx, ty)
    y = triangle_yaw(TrianglePair(entry(), entry(verts=moved)))
    assert abs(math.remainder(y - th, 2 * math.pi)) < 1e-6


def test_thirty_degrees_and_mirror():
    moved = TRI @ rot_2d(math.radians(30)).T
    assert math.isclose(triangle_yaw(TrianglePair(entry(), entry(verts=moved))), math.radians(30), abs_tol=1e-6)
    mirrored = TRI * (1, -1)
    assert triangle_yaw(TrianglePair(entry(), entry(verts=mirrored))) is None
    line = np.array([[0, 0], [1, 0], [2, 0]], float)
    assert triangle_yaw(TrianglePair(entry(verts=line), entry(verts=line))) is None


def test_noisy_yaw_monte_carlo_bound():
    r = np.random.default_rng(0)
    base = np.array([[0.0, 0.0], [5.0, 0.0], [2.0, 4.0]])
    n = 1000
    P = np.broadcast_to(base, (n, 3, 2))
    C = P @ rot_2d(math.radians(30)).T + r.normal(0, 0.02, (n, 3, 2))
    y, ok = yaw_batch(P, C)
    assert ok.all()
    assert np.max(np.abs(np.degrees(y) - 30)) < 1.0


def test_unanimous_vote():
    mask, th = vote(np.full(10, 0.5))
    assert mask.all() and math.isclose(th, 0.5)


def test_outlier_excluded():
    mask, th = vote(np.r_[np.full(10, 0.5), 2.6], MatchConfig(tau_yaw=0.1))
    assert mask[:10].all() and not mask[10]


def test_wraparound_cluster():
    y = np.radians([179.0, -179.0, 179.5])
    mask, th = vote(y)
    assert mask.all()
    assert abs(math.remainder(th - math.pi, 2 * math.pi)) < math.radians(1)


def test_empty_vote():
    inl, th = yaw_vote([])
    assert inl == [] and th is None


@given(st.lists(st.floats(-math.pi, math.pi), min_size=1, max_size=80))
def test_inlier_set_is_exactly_the_bound(ys):
    cfg = MatchConfig()
    mask, th = vote(np.array(ys), cfg)
    d = np.array([abs(math.remainder(y - th, 2 * math.pi)) for y in ys])
    assert np.array_equal(mask, d < cfg.tau_yaw)


@given(st.integers(1, 5), st.integers(0, 1000))
def test_grouped_vote_equals_separate_votes(g, seed):
    r = np.random.default_rng(seed)
    lab = r.integers(0, g, 60)
    ys = r.uniform(-math.pi, math.pi, 60)
    mask, th = vote_groups(ys, lab, g)
    for k in range(g):
        sel = lab == k
        if not sel.any():
            assert math.isnan(th[k])
            continue
        m1, t1 = vote(ys[sel])
        assert np.array_equal(mask[sel], m1) and math.isclose(th[k], t1, abs_tol=1e-12)


def test_yaw_vote_keeps_pair_objects():
    pairs = [with_yaw(TrianglePair(entry(), entry(verts=TRI @ rot_2d(0.4).T))) for _ in range(4)]
    inl, th = yaw_vote(pairs)
    assert inl == pairs and math.isclose(th, 0.4, abs_tol=1e-9)


def test_rigid_copy_has_no_false_rejections():
    r = np.random.default_rng(3)
    xy = r.uniform(-15, 15, (40, 2))
    dbh = r.uniform(0.1, 0.6, 40)
    a = triangle_arrays(xy, np.arange(40))
    b = triangle_arrays(xy @ rot_2d(1.1).T + (2, -3), np.arange(40))
    qi, ci = match_triangle_arrays(a["hash"], dbh[a["verts"]], b["hash"], dbh[b["verts"]])
    # every query triangle whose hash is shared finds its twin
    shared = np.isin(a["hash"], b["hash"])
    assert len(qi) == shared.sum()
    y, ok = yaw_batch(xy[a["verts"][qi]], (xy @ rot_2d(1.1).T)[b["verts"][ci]])
    mask, th = vote(y[ok])
    assert ok.all() and mask.all() and math.isclose(th, 1.1, abs_tol=1e-9)


def test_disabled_dbh_filter_keeps_all_combinations():
    qh = np.array([5, 5, 7])
    ch = np.array([5, 5, 5, 9])
    qd = np.full((3, 3), 0.3)
    cd = np.full((4, 3), 2.0)
    qi, ci = match_triangle_arrays(qh, qd, ch, cd, MatchConfig(use_dbh_filter=False))
    assert len(qi) == 6
    qi, ci = match_triangle_arrays(qh, qd, ch, cd, MatchConfig())
    assert len(qi) == 0
