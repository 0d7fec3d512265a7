"""Acceptance suite: one test per headline criterion, each reporting a PASS/FAIL line.

The lines are collected in ``REPORT`` and printed in the terminal summary
(see ``conftest.py``), so they appear without ``-s``.
"""
import math
import time
from collections import defaultdict

import numpy as np
import pytest

from oracles import TABLE_ROWS, best_assignment_cost, multiset_intersection, s_interval
from treeloc.alignment import estimate_axis_alignment
from treeloc.cli import main
from treeloc.config import MatchConfig, PipelineConfig, PoseConfig
from treeloc.descriptors import compute_pdh, compute_tdh
from treeloc.experiments import (clutter_ablation, fused_storage, latency, pose_accuracy, rotation_invariance,
                                 scene_pairs_for_oracles)
from treeloc.geometry import rot_2d, rot_x, rot_y, rot_z
from treeloc.matching import dbh_filter
from treeloc.pose import irls_refine, overlap_score, planar_align_svd
from treeloc.scene import prepare_scene
from treeloc.triangles import HashIndex, build_triangles

REPORT = []


def report(n, name, ok, detail):
    REPORT.append(f"criterion {n} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


# ---------------------------------------------------------------- 1

def test_rotation_invariance():
    r = rotation_invariance(n_rotations=10, seed=0)
    ok = r.mean >= 0.95 and r.std <= 0.02 and r.seconds <= 60.0
    report(1, "rotation invariance", ok,
           f"R@1 mean {r.mean:.3f} (>= 0.95), std {r.std:.4f} (<= 0.02), {r.seconds:.1f} s (<= 60)")
    assert ok


# ---------------------------------------------------------------- 2

def test_metric_pose_accuracy():
    r = pose_accuracy(n_pairs=500, seed=0)
    ok = (r.failures == 0 and r.median_ate <= 0.05 and r.median_are <= 0.5 and r.planar_within_spatial
          and r.seconds <= 120.0)
    report(2, "metric pose accuracy", ok,
           f"median ATE {r.median_ate * 100:.2f} cm (<= 5), median ARE {r.median_are:.3f} deg (<= 0.5), "
           f"2D <= 3D on every pair {r.planar_within_spatial}, {r.failures} failures, {r.seconds:.1f} s (<= 120)")
    assert ok


# ---------------------------------------------------------------- 3

def _delta(q, c):
    return [[sum(abs(a - b) for a, b in zip(ti.dbhs, tj.dbhs)) for tj in c] for ti in q]


def test_hash_and_assignment_oracles():
    pairs = scene_pairs_for_oracles(100, seed=0)
    cfg = PipelineConfig()
    models = {}
    idx = HashIndex()
    for a, b in pairs:
        for inv in (a, b):
            m = prepare_scene(inv, cfg)
            models[inv.scene_id] = m
            idx.add(inv.scene_id, m.tri_hash)
    no_gate = MatchConfig(tau_dbh=1e9)
    s_bad = cost_bad = buckets = multi = 0
    max_tri = 0
    for a, b in pairs:
        qa, cb = models[a.scene_id], models[b.scene_id]
        max_tri = max(max_tri, len(qa.tri_hash), len(cb.tri_hash))
        S = int(idx.scores(qa.tri_hash, [b.scene_id])[0])
        s_bad += S != multiset_intersection(qa.tri_hash.tolist(), cb.tri_hash.tolist())
        ta = build_triangles(list(zip(qa.ids.tolist(), qa.xy)), {t.id: t for t in a.trees})
        tb = build_triangles(list(zip(cb.ids.tolist(), cb.xy)), {t.id: t for t in b.trees})
        ga, gb = defaultdict(list), defaultdict(list)
        for t in ta:
            ga[t.hash].append(t)
        for t in tb:
            gb[t.hash].append(t)
        for h in ga.keys() & gb.keys():
            q, c = ga[h], gb[h]
            if max(len(q), len(c)) > 6:
                continue
            buckets += 1
            multi += max(len(q), len(c)) > 1
            got = sum(p.dbh_cost for p in dbh_filter(q, c, no_gate))
            cost_bad += not math.isclose(got, best_assignment_cost(_delta(q, c)), rel_tol=1e-12, abs_tol=1e-12)
    ok = s_bad == 0 and cost_bad == 0 and max_tri <= 500 and multi > 0
    report(3, "hash and assignment oracles", ok,
           f"{s_bad} score mismatches over {len(pairs)} pairs (max {max_tri} triangles), "
           f"{cost_bad} assignment mismatches over {buckets} shared buckets ({multi} with several entries)")
    assert ok


# ---------------------------------------------------------------- 4

def test_outlier_rejection_gain():
    r = clutter_ablation(n_queries=200, seed=0, clutter=0.2)
    ok = r.gain >= 0.05
    report(4, "outlier rejection under clutter", ok,
           f"SR {r.sr_full:.3f} with filtering and voting vs {r.sr_ablated:.3f} without, gain {r.gain:.3f} (>= 0.05)")
    assert ok


# ---------------------------------------------------------------- 5

def test_latency():
    r = latency(n_scenes=7000, n_queries=200, seed=0)
    ok = r.n_scenes >= 7000 and r.mean_ms <= 10.0
    report(5, "latency", ok, f"{r.mean_ms:.2f} ms mean over 200 queries (<= 10) on {r.n_scenes} scenes, "
                             f"same-scene rate {r.same_scene_rate:.3f}")
    assert ok


# ---------------------------------------------------------------- 6

def test_storage():
    r = fused_storage(n_trees=2000, n_sessions=4, seed=0)
    ok = r.n_trees == 2000 and r.size_bytes <= 200 * 1024
    report(6, "storage", ok, f"{r.size_bytes / 1024:.1f} KB (<= 200) for {r.n_trees} fused trees "
                             f"from {r.n_sessions} sessions")
    assert ok


# ---------------------------------------------------------------- 7

def test_invariance_suite():
    rng = np.random.default_rng(0)
    fails = defaultdict(int)
    for _ in range(200):
        c = rng.uniform(-18, 18, (40, 2))
        d = rng.uniform(0.1, 0.6, 40)
        rc = c @ rot_2d(rng.uniform(-math.pi, math.pi)).T
        fails["tdh rotation"] += not np.array_equal(compute_tdh(c, d).bins, compute_tdh(rc, d).bins)
        fails["pdh rotation"] += not np.array_equal(compute_pdh(c).bins, compute_pdh(rc).bins)
        fails["pdh translation"] += not np.array_equal(compute_pdh(c).bins,
                                                       compute_pdh(c + rng.uniform(-50, 50, 2)).bins)

        Rv = rot_x(rng.uniform(-1.5, 1.5)) @ rot_y(rng.uniform(-1.5, 1.5)) @ rot_z(rng.uniform(-3, 3))
        axes = np.tile(Rv @ [0.0, 0.0, 1.0], (int(rng.integers(1, 30)), 1))
        R = estimate_axis_alignment(axes).rotation
        fails["alignment"] += not np.all(np.abs(axes @ R.T @ [0.0, 0.0, 1.0]) >= 1 - 1e-6)

        src = rng.uniform(-10, 10, (25, 2))
        dst = src @ rot_2d(rng.uniform(-3, 3)).T + rng.uniform(-5, 5, 2) + rng.normal(0, 0.05, (25, 2))
        k = rng.integers(0, 25, 6)
        dst[k] += rng.normal(0, 3, (6, 2))
        _, info = irls_refine((src, dst), planar_align_svd((src, dst)), PoseConfig(irls_iters=30),
                              return_info=True)
        h = info["objective"]
        fails["irls monotone"] += not all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(h, h[1:]))

        nq, nc = (int(x) for x in rng.integers(1, 50, 2))
        lo, hi = np.sort(rng.uniform(0, 30, 2))
        vals = [overlap_score(m, nq, nc, (lo, 0)) for m in range(min(nq, nc) + 1)]
        fails["overlap in matches"] += not all(b > a for a, b in zip(vals, vals[1:]))
        m = min(nq, nc)
        fails["overlap in offset"] += overlap_score(m, nq, nc, (hi, 0)) > overlap_score(m, nq, nc, (lo, 0))
    rows = sum(lo <= s <= hi for (mu, sd, s), (lo, hi) in ((r, s_interval(*r[:2])) for r in TABLE_ROWS))
    ok = not any(fails.values()) and rows >= 3
    bad = ", ".join(f"{k} {v}" for k, v in fails.items() if v) or "none"
    report(7, "invariance suite", ok, f"violations over 200 random trials: {bad}; "
                                      f"stability table rows reproduced {rows}/{len(TABLE_ROWS)} (>= 3)")
    assert ok


# ---------------------------------------------------------------- 8

def _cli_run(tmp, world, queries, tag):
    db = tmp / f"db_{tag}.tdb"
    assert main(["build-db", str(world), "--grid", "10", "--radius", "15", "--seed", "4", "--out", str(db)]) == 0
    outs = []
    for q in queries:
        out = tmp / f"res_{tag}_{q.stem}.txt"
        assert main(["query", str(q), "--db", str(db), "--seed", "4", "--out", str(out)]) == 0
        outs.append(out)
    return [db, *outs]


def test_end_to_end_determinism(tmp_path):
    t0 = time.perf_counter()
    world = tmp_path / "world.dfi"
    assert main(["gen", "--seed", "4", "--out", str(world), "--queries", "100",
                 "--query-dir", str(tmp_path / "q")]) == 0
    queries = sorted((tmp_path / "q").glob("query_*.dfi"))
    a = _cli_run(tmp_path, world, queries, "a")
    b = _cli_run(tmp_path, world, queries, "b")
    differ = sum(x.read_bytes() != y.read_bytes() for x, y in zip(a, b))
    ok = len(queries) == 100 and differ == 0
    report(8, "end-to-end determinism", ok, f"{differ} of {len(a)} output files differ between two runs "
                                            f"({len(queries)} query calls each, {time.perf_counter() - t0:.1f} s)")
    assert ok


@pytest.fixture(scope="module", autouse=True)
def _order_report():
    yield
    REPORT.sort(key=lambda s: int(s.split()[1]))
