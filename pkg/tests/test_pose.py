import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treeloc.alignment import AxisAlignment, estimate_axis_alignment
from treeloc.config import PoseConfig
from treeloc.geometry import RigidTransform, matrix_to_quat, rot_2d, rot_x, rot_y, rot_z
from treeloc.pose import (DegenerateError, PlanarTransform, align_2d_groups, compose_final, irls_groups, irls_refine,
                          overlap_score, planar_align_svd, rollpitch_ransac, tree_correspondences, vertical_correct,
                          weighted_align_2d)


def pts(n, seed, spread=15.0):
    return np.random.default_rng(seed).uniform(-spread, spread, (n, 2))


def angdeg(a, b):
    return math.degrees(math.acos(np.clip(a @ b / np.linalg.norm(a) / np.linalg.norm(b), -1, 1)))


# ---------------------------------------------------------------- planar fit

def test_identity_and_translation():
    p = pts(5, 0)
    T = planar_align_svd(list(zip(p, p)))
    assert np.allclose(T.rotation, np.eye(2)) and np.allclose(T.translation, 0)
    T = planar_align_svd(list(zip(p, p + (3, -1))))
    assert np.allclose(T.rotation, np.eye(2)) and np.allclose(T.translation, (3, -1))


def test_degenerate_inputs():
    with pytest.raises(DegenerateError):
        planar_align_svd([((0, 0), (1, 1))])
    with pytest.raises(DegenerateError):
        planar_align_svd([((1, 1), (0, 0)), ((1, 1), (2, 2))])


def noisy_fit_errors(sigma_axis, seed=1, trials=1000, n=20):
    r = np.random.default_rng(seed)
    terr, rerr = [], []
    for _ in range(trials):
        th, t = r.uniform(-math.pi, math.pi), r.uniform(-10, 10, 2)
        src = r.uniform(-15, 15, (n, 2))
        dst = src @ rot_2d(th).T + t + r.normal(0, sigma_axis, (n, 2))
        T = planar_align_svd((src, dst))
        terr.append(np.linalg.norm(T.translation - t))
        rerr.append(abs(math.degrees(math.remainder(T.angle - th, 2 * math.pi))))
    return np.percentile(terr, 99), np.percentile(rerr, 99)


def test_noisy_fit_percentile_rms_centimetre():
    # 1 cm RMS displacement per point (isotropic, 7.1 mm per axis)
    t99, r99 = noisy_fit_errors(0.01 / math.sqrt(2))
    assert t99 < 0.005 and r99 < 0.2


def test_noisy_fit_percentile_at_statistical_limit():
    # 1 cm per axis: translation error is Rayleigh with scale sigma/sqrt(n) plus a
    # small lever-arm term, so its 99th percentile sits near 3.03 sigma/sqrt(n)
    t99, r99 = noisy_fit_errors(0.01)
    limit = math.sqrt(-2 * math.log(0.01)) * 0.01 / math.sqrt(20)
    assert t99 < 1.05 * limit and r99 < 0.2


@given(st.integers(0, 10_000), st.floats(-math.pi, math.pi))
def test_reflection_never_returned(seed, th):
    src = pts(8, seed)
    dst = (src * (1, -1)) @ rot_2d(th).T
    T = weighted_align_2d(src, dst)
    assert np.isclose(np.linalg.det(T.rotation), 1.0)


# ---------------------------------------------------------------- IRLS

def test_irls_small_residuals_equal_least_squares():
    r = np.random.default_rng(2)
    src = pts(15, 2)
    dst = src @ rot_2d(0.7).T + (1, 2) + r.normal(0, 0.01, (15, 2))
    ls = weighted_align_2d(src, dst)
    T = irls_refine((src, dst), planar_align_svd((src, dst)))
    assert np.allclose(T.rotation, ls.rotation, atol=1e-9) and np.allclose(T.translation, ls.translation, atol=1e-9)


def outlier_fixture():
    src = pts(20, 3)
    dst = src @ rot_2d(-0.4).T + (2, 1)
    dst[7] += (5, 0)
    return src, dst, weighted_align_2d(np.delete(src, 7, 0), np.delete(dst, 7, 0))


def probe_gap(A, B):
    probe = pts(10, 4)
    return np.max(np.linalg.norm(A.apply(probe) - B.apply(probe), axis=1))


def test_irls_reaches_huber_optimum():
    from scipy.optimize import minimize

    from treeloc.pose import huber_objective
    src, dst, clean = outlier_fixture()
    T = irls_refine((src, dst), planar_align_svd((src, dst)), PoseConfig(irls_iters=200))

    def f(p):
        res = np.linalg.norm(dst - PlanarTransform.from_angle(p[0], p[1:]).apply(src), axis=1)
        return huber_objective(res, 0.3)
    opt = minimize(f, [0.0, 0.0, 0.0], method="Nelder-Mead",
                   options=dict(xatol=1e-10, fatol=1e-14, maxiter=20000))
    ref = PlanarTransform.from_angle(opt.x[0], opt.x[1:])
    assert probe_gap(T, ref) < 1e-5
    # the outlier's pull is bounded: far below the unweighted fit's bias
    ls = planar_align_svd((src, dst))
    assert probe_gap(T, clean) < 0.1 * probe_gap(ls, clean)


@pytest.mark.xfail(strict=True, reason="Huber influence is bounded, not zero: a 5 m outlier "
                   "leaves about huber_delta/19 of bias, ~15 mm at default settings")
def test_irls_single_outlier_within_millimetre():
    src, dst, clean = outlier_fixture()
    T = irls_refine((src, dst), planar_align_svd((src, dst)), PoseConfig(irls_iters=50))
    assert probe_gap(T, clean) < 1e-3


def test_irls_low_weight_mass_returns_init():
    src = np.array([[0.0, 0.0], [1.0, 0.0]])
    dst = src + 100.0
    init = PlanarTransform.identity()
    T, info = irls_refine((src, dst), init, return_info=True)
    assert T is init and info["warning"] == "low_weight_mass"


@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_irls_objective_monotone(seed, outlier_scale):
    r = np.random.default_rng(seed)
    src = pts(25, seed)
    dst = src @ rot_2d(r.uniform(-3, 3)).T + r.uniform(-5, 5, 2) + r.normal(0, 0.05, (25, 2))
    k = r.integers(0, 25, 6)
    dst[k] += r.normal(0, outlier_scale * 3, (6, 2))
    init = planar_align_svd((src, dst))
    _, info = irls_refine((src, dst), init, PoseConfig(irls_iters=30), return_info=True)
    h = info["objective"]
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(h, h[1:]))


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_grouped_fits_match_single_fits(seed, g):
    r = np.random.default_rng(seed)
    lab = np.sort(r.integers(0, g, 80))
    src = r.uniform(-10, 10, (80, 2))
    th = r.uniform(-3, 3, g)
    t = r.uniform(-5, 5, (g, 2))
    dst = np.einsum("nij,nj->ni", np.stack([rot_2d(a) for a in th])[lab], src) + t[lab] + r.normal(0, 0.3, (80, 2))
    w = r.uniform(0.1, 1, 80)
    gth, gt, W = align_2d_groups(src, dst, w, lab, g)
    ith, it, warn = irls_groups(src, dst, lab, gth.copy(), gt.copy(), 0.3, 10)
    for k in range(g):
        m = lab == k
        if m.sum() < 2:
            continue
        one = weighted_align_2d(src[m], dst[m], w[m])
        assert math.isclose(math.remainder(gth[k] - one.angle, 2 * math.pi), 0, abs_tol=1e-9)
        assert np.allclose(gt[k], one.translation, atol=1e-8)
        ref = irls_refine((src[m], dst[m]), PlanarTransform.from_angle(gth[k], gt[k]))
        assert math.isclose(math.remainder(ith[k] - ref.angle, 2 * math.pi), 0, abs_tol=1e-8)
        assert np.allclose(it[k], ref.translation, atol=1e-7)


# ---------------------------------------------------------------- correspondences

def proj(xy, dbh=None, ids=None):
    ids = range(len(xy)) if ids is None else ids
    dbh = [0.3] * len(xy) if dbh is None else dbh
    return [(i, p, d) for i, p, d in zip(ids, xy, dbh)]


def test_exact_overlay_matches_twins():
    xy = pts(12, 5)
    T = PlanarTransform.from_angle(0.3, (1, 1))
    m = tree_correspondences(proj(xy), proj(T.apply(xy), ids=range(100, 112)), T)
    assert m == [(i, 100 + i) for i in range(12)]


def test_distance_gate():
    m = tree_correspondences(proj([(0, 0), (10, 0)]), proj([(0.1, 0)]), PlanarTransform.identity())
    assert m == [(0, 0)]


def test_conflict_goes_to_the_closer_tree():
    q = proj([(0.0, 0.0), (0.3, 0.0)])
    c = proj([(0.25, 0.0), (0.65, 0.0)])
    m = tree_correspondences(q, c, PlanarTransform.identity())
    # query 1 is 0.05 from candidate 0 and wins it; query 0 has no other neighbour inside 0.5 m
    assert m == [(1, 0)]
    c2 = proj([(0.25, 0.0), (0.2, 0.3)])
    assert tree_correspondences(q, c2, PlanarTransform.identity()) == [(0, 1), (1, 0)]


def test_dbh_gate():
    assert tree_correspondences(proj([(0, 0)], [0.3]), proj([(0, 0)], [0.5]), PlanarTransform.identity()) == []


# ---------------------------------------------------------------- roll / pitch

def leaning(n, deg, seed):
    r = np.random.default_rng(seed)
    az, lean = r.uniform(-math.pi, math.pi, n), np.radians(r.uniform(0, deg, n))
    return np.column_stack([np.sin(lean) * np.cos(az), np.sin(lean) * np.sin(az), np.cos(lean)])


def test_aligned_axes_give_identity():
    u = leaning(10, 5, 0)
    assert np.allclose(rollpitch_ransac(list(zip(u, u)), np.eye(3)), np.eye(3), atol=1e-12)


def test_known_tilt_recovered():
    u = leaning(20, 5, 1)
    Rt = rot_x(math.radians(5)) @ rot_y(math.radians(-3))
    R = rollpitch_ransac((u, u @ Rt.T), np.eye(3))
    ez = np.array([0, 0, 1.0])
    assert angdeg(R @ ez, Rt @ ez) < 0.05


def test_known_tilt_with_yaw_input():
    u = leaning(20, 5, 2)
    Rz = rot_z(1.2)
    Rt = rot_x(math.radians(-4)) @ rot_y(math.radians(2))
    R = rollpitch_ransac((u, (u @ Rz.T) @ Rt.T), Rz)
    assert max(angdeg(R @ Rz @ a, Rt @ Rz @ a) for a in u) < 0.05


def test_axis_outliers_monte_carlo():
    r = np.random.default_rng(3)
    ez = np.array([0, 0, 1.0])
    errs = []
    for trial in range(500):
        u = leaning(20, 5, 1000 + trial)
        Rt = rot_x(math.radians(r.uniform(-5, 5))) @ rot_y(math.radians(r.uniform(-5, 5)))
        w = u @ Rt.T
        bad = r.choice(20, 4, replace=False)
        v = r.normal(size=(4, 3))
        w[bad] = v / np.linalg.norm(v, axis=1, keepdims=True)
        R = rollpitch_ransac((u, w), np.eye(3))
        errs.append(angdeg(R @ ez, Rt @ ez))
    assert max(errs) < 0.5


@given(st.integers(0, 10_000))
def test_rollpitch_has_zero_twist(seed):
    r = np.random.default_rng(seed)
    u = leaning(15, 5, seed)
    Rt = rot_x(r.uniform(-0.3, 0.3)) @ rot_y(r.uniform(-0.3, 0.3))
    R = rollpitch_ransac((u, u @ Rt.T + r.normal(0, 0.01, (15, 3))), np.eye(3))
    assert abs(matrix_to_quat(R)[3]) < 1e-9


def test_no_consensus_flags_low_confidence():
    R, info = rollpitch_ransac((np.array([[0, 0, 1.0]]), np.array([[1.0, 0, 0]])), np.eye(3), return_info=True)
    assert np.array_equal(R, np.eye(3)) and not info["confident"]


# ---------------------------------------------------------------- vertical

def vrows(x, y, bq, bc):
    return np.column_stack([bq, x, y, bc])


def test_pure_offset():
    r = np.random.default_rng(4)
    x, y, b = r.uniform(-10, 10, (3, 12))
    dz, dphi, dpsi = vertical_correct(vrows(x, y, b, b + 0.4))
    assert np.allclose([dz, dphi, dpsi], [0.4, 0, 0], atol=1e-9)


def test_tilt_along_x():
    r = np.random.default_rng(5)
    x, y, b = r.uniform(-10, 10, (3, 12))
    dz, dphi, dpsi = vertical_correct(vrows(x, y, b, b - 0.05 * x))
    assert np.allclose([dz, dphi, dpsi], [0, 0, 0.05], atol=1e-6)


def test_height_outlier_rejected():
    r = np.random.default_rng(6)
    x, y, b = r.uniform(-10, 10, (3, 11))
    bc = b + 0.2 + 0.01 * y
    bc[4] += 2.0
    (dz, dphi, dpsi), info = vertical_correct(vrows(x, y, b, bc), return_info=True)
    assert np.allclose([dz, dphi, dpsi], [0.2, 0.01, 0], atol=1e-9)
    assert info["inliers"] == 10


@pytest.mark.parametrize("n", [1, 2])
def test_few_matches_solve_offset_only(n):
    dz, dphi, dpsi = vertical_correct(vrows([1.0, 5.0][:n], [2.0, -3.0][:n], [0, 0][:n], [0.3, 0.5][:n]))
    assert dphi == 0.0 and dpsi == 0.0 and math.isclose(dz, [0.3, 0.4][n - 1])


def test_no_matches():
    out, info = vertical_correct(np.zeros((0, 4)), return_info=True)
    assert out == (0.0, 0.0, 0.0) and not info["confident"]


# ---------------------------------------------------------------- composition and overlap

def test_compose_identity():
    I = AxisAlignment.identity()
    T = compose_final(PlanarTransform.identity(), np.eye(3), (0, 0, 0), I, I)
    assert T == RigidTransform.identity()


def test_compose_without_alignment_equals_six_dof():
    I = AxisAlignment.identity()
    t2 = PlanarTransform.from_angle(0.5, (1, -2))
    rp = rot_x(0.02) @ rot_y(-0.01)
    T = compose_final(t2, rp, (0.3, 0.01, 0.02), I, I)
    expect = RigidTransform(rot_x(0.01) @ rot_y(0.02) @ rp, [0, 0, 0.3]) @ t2.lift()
    assert np.allclose(T.rotation, expect.rotation) and np.allclose(T.translation, expect.translation)


def test_compose_undoes_alignments():
    aq = estimate_axis_alignment([rot_x(0.1) @ [0, 0, 1.0]])
    ac = estimate_axis_alignment([rot_y(-0.2) @ [0, 0, 1.0]])
    T = compose_final(PlanarTransform.identity(), np.eye(3), (0, 0, 0), aq, ac)
    assert np.allclose(T.rotation, ac.rotation.T @ aq.rotation)


def test_overlap_examples():
    assert overlap_score(10, 10, 10, (0, 0)) == 1.0
    assert math.isclose(overlap_score(5, 10, 10, (0, 0)), 1 / 3)
    assert math.isclose(overlap_score(7, 7, 7, (10, 0), 10.0), math.exp(-1))
    with pytest.raises(ValueError):
        overlap_score(4, 3, 10, (0, 0))


@given(st.integers(1, 50), st.integers(1, 50), st.floats(0, 30), st.floats(0, 30))
def test_overlap_monotone(nq, nc, t1, t2):
    lo, hi = sorted((t1, t2))
    k = min(nq, nc)
    vals = [overlap_score(m, nq, nc, (lo, 0)) for m in range(k + 1)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert overlap_score(k, nq, nc, (hi, 0)) <= overlap_score(k, nq, nc, (lo, 0))
    assert 0 <= vals[-1] <= 1
