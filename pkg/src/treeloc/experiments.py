"""Synthetic benchmarks behind the acceptance suite and the runners in ``scripts/``.

Every experiment is a pure function of its arguments and seed, so repeated
runs report identical numbers (apart from wall-clock timings).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Sequence

import numpy as np

from .config import PipelineConfig
from .evaluation import EvalRecord, compute_pose_metrics, compute_pr_metrics
from .geometry import RigidTransform, axis_angle, pose_errors
from .inventory import Inventory, radius_query, serialize_inventory, trees_from_arrays
from .pipeline import build_database, build_grid_database, estimate_pose, fuse_sessions, localize
from .synthetic import ForestParams, PerturbationParams, generate_forest, perturb_scene, philox, random_rotation
from .triangles import triangle_arrays


def bounded_transform(rng: np.random.Generator, max_tilt_deg: float, max_shift: float) -> RigidTransform:
    """Uniform yaw, roll and pitch each within ``max_tilt_deg``, shift uniform in a ball."""
    yaw = rng.uniform(-math.pi, math.pi)
    roll, pitch = np.radians(rng.uniform(-max_tilt_deg, max_tilt_deg, 2))
    R = axis_angle((1.0, 0.0, 0.0), roll) @ axis_angle((0.0, 1.0, 0.0), pitch) @ axis_angle((0.0, 0.0, 1.0), yaw)
    d = rng.normal(size=3)
    d *= max_shift * rng.random() ** (1 / 3) / np.linalg.norm(d)
    return RigidTransform(R, d)


def _record(q: Inventory, r, db, tp: float = 5.0) -> EvalRecord:
    sp = db.pose_of(r.best_scene_id) if r.best_scene_id is not None else None
    return EvalRecord(q.scene_id, q.pose, r, tp, sp, None)


# ------------------------------------------------------------------ rotation invariance

@dataclass
class RotationResult:
    recall_per_rotation: List[float]
    seconds: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.recall_per_rotation))

    @property
    def std(self) -> float:
        return float(np.std(self.recall_per_rotation))


def rotation_invariance(n_rotations: int = 10, seed: int = 0, noise: float = 0.02) -> RotationResult:
    """50 scenes on a 10 x 5 grid over a 1 ha forest, re-queried under shared SO(3) rotations.

    Each round draws one rotation (any yaw, tilt up to 90 degrees), applies it
    to every database scene about the scene origin, adds center noise and
    records R@1 for the round.
    """
    t0 = time.perf_counter()
    g = generate_forest(ForestParams(extent=(100.0, 100.0), density=400.0, seed=seed))
    centers = [(5.0 + 10.0 * i, 10.0 + 20.0 * j) for j in range(5) for i in range(10)]
    scenes = [radius_query(g, c, 15.0, scene_id=k) for k, c in enumerate(centers)]
    db = build_database(scenes)
    rng = philox(seed, 21)
    recalls = []
    for rot in range(n_rotations):
        T = RigidTransform(random_rotation(rng, 90.0), np.zeros(3))
        recs = []
        for s in scenes:
            q = perturb_scene(s, PerturbationParams(T, center_noise_sigma=noise, seed=rot * 1000 + s.scene_id))
            recs.append(_record(q, localize(q, db), db))
        recalls.append(compute_pr_metrics(recs)[0])
    return RotationResult(recalls, time.perf_counter() - t0)


# ------------------------------------------------------------------ pose accuracy

@dataclass
class PoseAccuracyResult:
    ate: np.ndarray
    are_deg: np.ndarray
    ate_2d: np.ndarray
    are_2d_deg: np.ndarray
    failures: int
    seconds: float

    @property
    def median_ate(self) -> float:
        return float(np.median(self.ate))

    @property
    def median_are(self) -> float:
        return float(np.median(self.are_deg))

    @property
    def planar_within_spatial(self) -> bool:
        return bool(np.all(self.ate_2d <= self.ate) and np.all(self.are_2d_deg <= self.are_deg))


def pose_accuracy(n_pairs: int = 500, seed: int = 0, max_shift: float = 5.0, max_tilt: float = 15.0,
                  noise: float = 0.02, base_noise: float = 0.01, dropout: float = 0.1) -> PoseAccuracyResult:
    """Direct query/candidate registration; a pair with no estimate counts as a failure."""
    t0 = time.perf_counter()
    g = generate_forest(ForestParams(extent=(200.0, 200.0), density=400.0, seed=seed, terrain_amplitude=2.0))
    rng = philox(seed, 22)
    errs, failures = [], 0
    for k in range(n_pairs):
        cand = radius_query(g, rng.uniform(20.0, 180.0, 2), 15.0, scene_id=k)
        T = bounded_transform(rng, max_tilt, max_shift)
        q = perturb_scene(cand, PerturbationParams(T, center_noise_sigma=noise, base_noise_sigma=base_noise,
                                                   dropout_rate=dropout, seed=k))
        est = estimate_pose(q, cand)
        if est is None:
            failures += 1
            continue
        errs.append(pose_errors(est.transform, T.inverse()))
    e = np.array(errs, dtype=float).reshape(-1, 4)
    return PoseAccuracyResult(e[:, 0], np.degrees(e[:, 1]), e[:, 2], np.degrees(e[:, 3]), failures,
                              time.perf_counter() - t0)


# ------------------------------------------------------------------ outlier rejection ablation

@dataclass
class AblationResult:
    sr_full: float
    sr_ablated: float
    seconds: float

    @property
    def gain(self) -> float:
        return self.sr_full - self.sr_ablated


def clutter_ablation(n_queries: int = 200, seed: int = 0, clutter: float = 0.2, spacing: float = 5.0,
                     max_shift: float = 5.0, max_tilt: float = 15.0, noise: float = 0.02,
                     dropout: float = 0.1, radius: float = 15.0, dbh_noise: float = 0.0,
                     extent: float = 100.0, density: float = 400.0, query_mode: str = "offgrid"
                     ) -> AblationResult:
    """Success rate with and without DBH filtering plus yaw voting on cluttered queries.

    ``query_mode="offgrid"`` cuts each query at a random position at least 10 m
    inside the forest, so it only partly overlaps the nearest grid scenes;
    ``"grid"`` re-uses a database scene as the query.
    """
    if query_mode not in ("offgrid", "grid"):
        raise ValueError(f"unknown query_mode {query_mode!r}")
    t0 = time.perf_counter()
    g = generate_forest(ForestParams(extent=(extent, extent), density=density, seed=seed))
    full = PipelineConfig()
    ablated = replace(full, match=replace(full.match, use_dbh_filter=False, use_yaw_voting=False))
    db = build_grid_database(g, spacing, radius, full)
    scene_xy = np.array([db.pose_of(int(s)).translation[:2] for s in db.retrievable_ids])
    rng = philox(seed, 23)
    ids = db.retrievable_ids
    queries = []
    for k in range(n_queries):
        if query_mode == "grid":
            src = db.models[int(ids[rng.integers(len(ids))])].inventory
        else:
            src = radius_query(g, rng.uniform(10.0, extent - 10.0, 2), radius, scene_id=k)
        T = bounded_transform(rng, max_tilt, max_shift)
        queries.append(perturb_scene(src, PerturbationParams(T, center_noise_sigma=noise, dropout_rate=dropout,
                                                             clutter_rate=clutter, dbh_noise_sigma=dbh_noise,
                                                             seed=k)))
    near = [float(np.min(np.hypot(*(scene_xy - q.pose.translation[:2]).T))) for q in queries]
    out = []
    for cfg in (full, ablated):
        db.config = cfg
        recs = []
        for i, (q, d) in enumerate(zip(queries, near)):
            r = localize(q, db)
            sp = db.pose_of(r.best_scene_id) if r.best_scene_id is not None else None
            recs.append(EvalRecord(i, q.pose, r, 5.0, sp, d))
        out.append(compute_pose_metrics(recs)["success_rate"])
    db.config = full
    return AblationResult(out[0], out[1], time.perf_counter() - t0)


# ------------------------------------------------------------------ latency

@dataclass
class LatencyResult:
    n_scenes: int
    latencies_ms: np.ndarray
    same_scene_rate: float
    build_seconds: float
    stage_us: dict = field(default_factory=dict)

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.latencies_ms))


def latency(n_scenes: int = 7000, n_queries: int = 200, seed: int = 0, spacing: float = 5.0,
            radius: float = 15.0, db=None) -> LatencyResult:
    """Mean wall-clock ``localize`` time on a square grid database of at least ``n_scenes`` scenes."""
    t0 = time.perf_counter()
    if db is None:
        # the grid spans the stems' bounding box, a little inside the extent
        side = math.ceil(math.sqrt(n_scenes)) * spacing
        g = generate_forest(ForestParams(extent=(side, side), seed=seed))
        db = build_grid_database(g, spacing, radius)
    build_s = time.perf_counter() - t0
    rng = philox(seed, 24)
    ids = db.retrievable_ids
    queries = []
    for k in range(n_queries):
        sid = int(ids[rng.integers(len(ids))])
        T = RigidTransform(random_rotation(rng, 90.0), np.zeros(3))
        queries.append((sid, perturb_scene(db.models[sid].inventory,
                                           PerturbationParams(T, center_noise_sigma=0.02, seed=k))))
    localize(queries[0][1], db)  # warm caches outside the timed loop
    lat, hits, stages = [], 0, {}
    for sid, q in queries:
        t = time.perf_counter()
        r = localize(q, db)
        lat.append((time.perf_counter() - t) * 1e3)
        hits += r.best_scene_id == sid
        for key, v in r.timings.items():
            stages[key] = stages.get(key, 0.0) + v / n_queries
    return LatencyResult(len(db), np.array(lat), hits / n_queries, build_s, stages)


# ------------------------------------------------------------------ storage

@dataclass
class StorageResult:
    n_trees: int
    n_sessions: int
    size_bytes: int


def fused_storage(n_trees: int = 2000, n_sessions: int = 4, seed: int = 0, overlap: float = 10.0,
                  noise: float = 0.02) -> StorageResult:
    """Fuse overlapping noisy session strips of one forest and measure the serialized map.

    Sessions are strips of the forest that overlap by ``overlap`` metres; each is
    expressed in its own frame with center noise and fused back with its true
    pose, so shared stems must be associated for the tree count to come out right.
    """
    density = 400.0
    width = 100.0
    length = n_trees / density * 1e4 / width
    g = generate_forest(ForestParams(extent=(length, width), density=density, seed=seed))
    rng = philox(seed, 25)
    step = length / n_sessions
    pairs = []
    for k in range(n_sessions):
        lo, hi = k * step - overlap / 2, (k + 1) * step + overlap / 2
        x = g.arrays["centers"][:, 0]
        part = [g.trees[i] for i in np.flatnonzero((x >= lo) & (x < hi))]
        pose = RigidTransform(random_rotation(rng, 10.0), [0.5 * (lo + hi), width / 2, 0.0])
        local = Inventory(k, RigidTransform.identity(), part)
        local = perturb_scene(local, PerturbationParams(pose.inverse(), center_noise_sigma=noise, seed=k))
        pairs.append((Inventory(k, RigidTransform.identity(), local.trees), pose))
    fused = fuse_sessions(pairs, 0.5, 0.1, 1e-3)
    text = serialize_inventory(Inventory(0, RigidTransform.identity(), fused.trees))
    return StorageResult(len(fused), n_sessions, len(text.encode("utf-8")))


def scene_pairs_for_oracles(n_pairs: int = 100, seed: int = 0, max_triangles: int = 500
                            ) -> List[Sequence[Inventory]]:
    """Scene pairs for hash-index checks: half from a random forest, half from jittered lattices.

    Lattices produce many congruent triangles, so hash buckets hold several
    entries on both sides. Stems are dropped from the end of a scene until it
    yields at most ``max_triangles`` triangles.
    """
    rng = philox(seed, 26)
    g = generate_forest(ForestParams(extent=(120.0, 120.0), density=400.0, seed=seed))
    out = []
    for k in range(n_pairs):
        if k % 2 == 0:
            a, b = (radius_query(g, rng.uniform(20, 100, 2), 15.0, scene_id=2 * k + j) for j in range(2))
        else:
            a, b = (_lattice(rng, 2 * k + j, 30) for j in range(2))
        out.append((_limit(a, max_triangles), _limit(b, max_triangles)))
    return out


def _limit(inv: Inventory, max_triangles: int) -> Inventory:
    trees = list(inv.trees)
    while len(trees) >= 3:
        xy = np.array([t.center for t in trees])
        if len(triangle_arrays(xy, np.array([t.id for t in trees]))["hash"]) <= max_triangles:
            break
        trees.pop()
    return Inventory(inv.scene_id, inv.pose, trees)


def _lattice(rng: np.random.Generator, scene_id: int, n: int) -> Inventory:
    cols = 6
    k = np.arange(n)
    xy = np.column_stack([k % cols, k // cols]) * 2.0 + rng.normal(0, 0.01, (n, 2))
    dbh = rng.choice([0.2, 0.25, 0.3], n) + rng.normal(0, 0.01, n)
    axes = np.tile([0.0, 0.0, 1.0], (n, 1))
    trees = trees_from_arrays(k, axes, xy, np.zeros(n), dbh)
    return Inventory(scene_id, RigidTransform.identity(), trees)

