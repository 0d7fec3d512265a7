"""Database construction, query localization, constraint export and multi-session fusion."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .config import PipelineConfig, config_from_items, format_value
from .descriptors import coarse_scores, top_k
from .geometry import RigidTransform, rot_z
from .inventory import (GlobalInventory, Inventory, InventoryError, ParseError, TreeRecord, quantize_tree,
                        radius_query, transform_trees)
from .matching import match_triangle_arrays, vote_groups, yaw_batch
from .pose import (PlanarTransform, PoseEstimate, align_2d_groups, compose_final, correspond, irls_groups,
                   overlap_score, rollpitch_ransac, vertical_correct)
from .scene import SceneModel, prepare_scene
from .triangles import HashIndex

log = logging.getLogger(__name__)


class DatabaseError(ValueError):
    pass


@dataclass(frozen=True)
class SceneInfo:
    scene_id: int
    pose: RigidTransform
    n_trees: int
    descriptorless: bool


class DescriptorDatabase:
    """Immutable-after-build store of scene descriptors, triangle hashes and tree data."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.scenes: List[SceneInfo] = []
        self.models: Dict[int, SceneModel] = {}
        self.index = HashIndex()
        self._ids = np.zeros(0, dtype=np.int64)
        self._tdh = np.zeros((40, 0))
        self._pdh = np.zeros((40, 0))

    def __len__(self) -> int:
        return len(self.scenes)

    def add(self, model: SceneModel) -> None:
        sid = model.scene_id
        if sid in self.models:
            raise DatabaseError(f"duplicate scene_id {sid}")
        self.models[sid] = model
        self.scenes.append(SceneInfo(sid, model.pose, model.n_trees, model.descriptorless))
        if model.descriptorless:
            log.info("scene %d has %d trees; stored without descriptors", sid, model.n_trees)
        else:
            self.index.add(sid, model.tri_hash)

    def finalize(self) -> "DescriptorDatabase":
        live = [s.scene_id for s in self.scenes if not s.descriptorless]
        self._ids = np.array(live, dtype=np.int64)
        # bin-major tables for the column-wise chi-square
        self._tdh = np.ascontiguousarray(np.vstack([self.models[s].tdh for s in live]).T) if live \
            else np.zeros((40, 0))
        self._pdh = np.ascontiguousarray(np.vstack([self.models[s].pdh for s in live]).T) if live \
            else np.zeros((40, 0))
        self.index.prepare()
        return self

    @property
    def retrievable_ids(self) -> np.ndarray:
        return self._ids

    def pose_of(self, scene_id: int) -> RigidTransform:
        return self.models[scene_id].pose

    def coarse(self, q: SceneModel, k: int) -> List[Tuple[int, float]]:
        if len(self._ids) == 0:
            raise DatabaseError("database has no retrievable scenes")
        return top_k(self._ids, coarse_scores(q.tdh, q.pdh, self._tdh, self._pdh, bin_major=True), k)


def build_database(inventories: Iterable[Inventory], config: PipelineConfig = PipelineConfig()
                   ) -> DescriptorDatabase:
    db = DescriptorDatabase(config)
    for inv in inventories:
        if inv.scene_id in db.models:
            raise DatabaseError(f"duplicate scene_id {inv.scene_id}")
        db.add(prepare_scene(inv, config))
    return db.finalize()


def grid_poses(g: GlobalInventory, spacing: float) -> List[Tuple[float, float]]:
    """Grid positions over the inventory's bounding box, row by row."""
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    b = g.bounds()
    if b is None:
        return []
    lo, hi = b
    nx = int(math.floor((hi[0] - lo[0]) / spacing + 1e-9)) + 1
    ny = int(math.floor((hi[1] - lo[1]) / spacing + 1e-9)) + 1
    return [(lo[0] + ix * spacing, lo[1] + iy * spacing) for iy in range(ny) for ix in range(nx)]


def build_grid_database(g: GlobalInventory, spacing: float = 5.0, radius: float = 15.0,
                        config: PipelineConfig = PipelineConfig()) -> DescriptorDatabase:
    """One scene per grid pose; scene ids are the grid indices, scenes under 3 trees are skipped."""
    db = DescriptorDatabase(config)
    for k, (x, y) in enumerate(grid_poses(g, spacing)):
        inv = radius_query(g, (x, y), radius, scene_id=k)
        if len(inv) < 3:
            log.info("grid pose %d at (%.1f, %.1f): %d trees, skipped", k, x, y, len(inv))
            continue
        db.add(prepare_scene(inv, config))
    return db.finalize()


# ------------------------------------------------------------------ localization

@dataclass
class LocalizationResult:
    query_id: int
    best_scene_id: Optional[int]
    transform: Optional[RigidTransform]
    overlap: float
    candidates_examined: int
    timings: Dict[str, float] = field(default_factory=dict)
    matches: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if (self.best_scene_id is None) != (self.transform is None):
            raise ValueError("transform must be present exactly when a scene is selected")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap out of [0, 1]")


@dataclass
class PlanarStage:
    """Planar registration of one candidate; enough to rank candidates by overlap."""
    transform: PlanarTransform
    q_rows: np.ndarray
    c_rows: np.ndarray
    inlier_triangles: int
    overlap: float


def planar_stage(q: SceneModel, c: SceneModel, config: PipelineConfig) -> Optional[PlanarStage]:
    """Triangle matching, DBH and yaw outlier rejection, robust 2D fit and tree correspondences.

    Returns ``None`` when no triangle correspondence survives.
    """
    return planar_stages(q, [c], config)[0]


HASH_SPAN = 1 << 32


def planar_stages(q: SceneModel, cands: Sequence[SceneModel], config: PipelineConfig
                  ) -> List[Optional[PlanarStage]]:
    """:func:`planar_stage` for several candidates in one vectorized pass.

    Candidate ``g``'s triangles are keyed ``g * 2**32 + hash`` so a single
    matching call keeps buckets of different candidates apart; the yaw vote and
    the weighted fits then run per group.
    """
    mcfg, pcfg = config.match, config.pose
    n = len(cands)
    out: List[Optional[PlanarStage]] = [None] * n
    nq = len(q.tri_hash)
    if n == 0 or nq == 0:
        return out
    sizes = np.array([len(c.tri_hash) for c in cands], dtype=np.int64)
    g_c = np.repeat(np.arange(n, dtype=np.int64), sizes)
    c_key = g_c * HASH_SPAN + np.concatenate([c.tri_hash for c in cands])
    c_dbh = np.concatenate([c.tri_dbh for c in cands]).reshape(-1, 3)
    # query keys in sorted order make the bucket searches much cheaper
    q_order = q.hash_order
    q_key = (np.arange(n, dtype=np.int64)[:, None] * HASH_SPAN + q.tri_hash[q_order][None, :]).reshape(-1)
    q_dbh = np.tile(q.tri_dbh[q_order], (n, 1))
    c_order = np.argsort(c_key, kind="stable")
    qk, ck = match_triangle_arrays(q_key, q_dbh, c_key, c_dbh, mcfg, c_order)
    if len(qk) == 0:
        return out
    label = qk // nq
    qi = q_order[qk - label * nq]
    c_xy = np.concatenate([c.xy for c in cands])
    row_off = np.concatenate([[0], np.cumsum([c.n_trees for c in cands])])
    c_verts = np.concatenate([c.tri_verts + row_off[g] for g, c in enumerate(cands)])
    Pq = q.xy[q.tri_verts[qi]]
    Pc = c_xy[c_verts[ck]]
    yaw, keep = yaw_batch(Pq, Pc)
    if mcfg.use_yaw_voting and keep.any():
        mask, _ = vote_groups(yaw[keep], label[keep], n, mcfg)
        keep = keep.copy()
        keep[keep] = mask
    if not keep.any():
        return out
    label, qi, ck, Pq, Pc = label[keep], qi[keep], ck[keep], Pq[keep], Pc[keep]
    n_tri = np.bincount(label, minlength=n)

    # centroid fit, falling back to the vertices when centroids cannot fix a rotation
    cq = q.tri_centroid[qi]
    c_cent = np.concatenate([c.tri_centroid for c in cands])[ck]
    theta, t, _ = align_2d_groups(cq, c_cent, np.ones(len(cq)), label, n)
    starts = np.flatnonzero(np.diff(np.concatenate([[-1], label])))
    spread = np.zeros(n)
    for axis in (0, 1):
        spread[label[starts]] = np.maximum(spread[label[starts]],
                                           np.maximum.reduceat(cq[:, axis], starts)
                                           - np.minimum.reduceat(cq[:, axis], starts))
    src = Pq.reshape(-1, 2)
    dst = Pc.reshape(-1, 2)
    vlabel = np.repeat(label, 3)
    weak = (n_tri < 2) | (spread < 1e-12)
    if weak.any():
        th_v, t_v, _ = align_2d_groups(src, dst, np.ones(len(src)), vlabel, n)
        theta = np.where(weak, th_v, theta)
        t = np.where(weak[:, None], t_v, t)
    theta, t, _ = irls_groups(src, dst, vlabel, theta, t, pcfg.huber_delta, pcfg.irls_iters)

    live = np.flatnonzero(n_tri > 0)
    pairs = []
    for g in live.tolist():
        c = cands[g]
        T = PlanarTransform.from_angle(theta[g], t[g])
        mq, mc = correspond(q.xy, q.dbh, c.xy, c.dbh, T, pcfg)
        pairs.append((g, mq, mc))
    # one Huber-weighted re-solve on the tree correspondences
    src = np.concatenate([q.xy[mq] for _, mq, _ in pairs])
    dst = np.concatenate([cands[g].xy[mc] for g, _, mc in pairs])
    lab = np.concatenate([np.full(len(mq), g, dtype=np.int64) for g, mq, _ in pairs])
    if len(src):
        theta, t, _ = irls_groups(src, dst, lab, theta, t, pcfg.huber_delta, 1)
    for g, mq, mc in pairs:
        c = cands[g]
        T = PlanarTransform.from_angle(theta[g], t[g])
        ov = overlap_score(len(mq), q.n_trees, c.n_trees, T.translation, pcfg.sigma_t, pcfg.use_penalty)
        out[g] = PlanarStage(T, mq, mc, int(n_tri[g]), ov)
    return out


def complete_pose(q: SceneModel, c: SceneModel, st: PlanarStage, config: PipelineConfig) -> PoseEstimate:
    """Roll-pitch and vertical correction on top of a planar stage, composed into the final pose."""
    pcfg = config.pose
    T, mq, mc = st.transform, st.q_rows, st.c_rows
    Rz = rot_z(T.angle)
    flags = []
    R_rp, rp_info = rollpitch_ransac((q.aligned_axes[mq], c.aligned_axes[mc]), Rz, pcfg, return_info=True)
    if not rp_info["confident"]:
        flags.append("rollpitch_low_confidence")
    t3 = np.array([T.translation[0], T.translation[1], 0.0])
    p_hat = (q.xyz[mq] @ Rz.T + t3) @ R_rp.T
    rows = np.column_stack([p_hat[:, 2], p_hat[:, 0], p_hat[:, 1], c.xyz[mc, 2]])
    dvert, v_info = vertical_correct(rows, pcfg, return_info=True)
    if not v_info["confident"]:
        flags.append("vertical_low_confidence")
    transform = compose_final(T, R_rp, dvert, q.alignment, c.alignment)
    matches = [(int(a), int(b)) for a, b in zip(q.ids[mq], c.ids[mc])]
    return PoseEstimate(transform, st.overlap, matches, float(np.linalg.norm(T.translation)), T,
                        st.inlier_triangles, tuple(flags))


def verify_candidate(q: SceneModel, c: SceneModel, config: PipelineConfig) -> Optional[PoseEstimate]:
    """Full 6-DoF verification of one query/candidate pair, ``None`` if nothing survives."""
    st = planar_stage(q, c, config)
    return None if st is None else complete_pose(q, c, st, config)


def estimate_pose(query: Inventory, candidate: Inventory, config: PipelineConfig = PipelineConfig()
                  ) -> Optional[PoseEstimate]:
    """Pose of ``query`` in ``candidate``'s frame, skipping retrieval."""
    return verify_candidate(prepare_scene(query, config), prepare_scene(candidate, config), config)


def localize(query: Inventory, db: DescriptorDatabase) -> LocalizationResult:
    cfg = db.config
    if len(query) < 3:
        raise ValueError("query needs at least 3 trees")
    t0 = time.perf_counter()
    q = prepare_scene(query, cfg)
    t1 = time.perf_counter()
    coarse = db.coarse(q, cfg.k_coarse)
    t2 = time.perf_counter()
    cands = np.array([s for s, _ in coarse], dtype=np.int64)
    S = db.index.scores(q.tri_hash, cands)
    order = np.lexsort((cands, -S))[: cfg.k_fine]
    fine = [(int(cands[i]), int(S[i])) for i in order]
    t3 = time.perf_counter()
    # overlap only depends on the planar stage, so the 6-DoF completion runs once for the winner
    best: Optional[Tuple[int, PlanarStage]] = None
    examined = 0
    chosen: List[int] = []
    for sid, score in fine:
        if score == 0:
            continue
        examined += 1
        chosen.append(sid)
    for sid, st in zip(chosen, planar_stages(q, [db.models[s] for s in chosen], cfg)):
        if st is not None and (best is None or st.overlap > best[1].overlap):
            best = (sid, st)
    est = complete_pose(q, db.models[best[0]], best[1], cfg) if best is not None else None
    t4 = time.perf_counter()
    timings = {"describe": (t1 - t0) * 1e6, "coarse": (t2 - t1) * 1e6, "fine": (t3 - t2) * 1e6,
               "verify": (t4 - t3) * 1e6, "total": (t4 - t0) * 1e6}
    if best is None:
        return LocalizationResult(query.scene_id, None, None, 0.0, examined, timings)
    return LocalizationResult(query.scene_id, best[0], est.transform, est.overlap, examined, timings,
                              est.matches)


# ------------------------------------------------------------------ constraints

@dataclass(frozen=True)
class Constraint:
    query_id: int
    scene_id: int
    transform: RigidTransform
    overlap: float


def _f(x: float) -> str:
    return repr(float(x))


def format_constraint(c: Constraint) -> str:
    t, q = c.transform.translation, c.transform.quat
    return "CON {} {} {}".format(c.query_id, c.scene_id, " ".join(_f(v) for v in (*t, *q, c.overlap)))


def export_constraints(results: Sequence[LocalizationResult], threshold: float = 0.2,
                       path: Optional[str] = None) -> List[Constraint]:
    """Keep results whose overlap strictly exceeds ``threshold``; optionally write the constraint file."""
    out = [Constraint(r.query_id, r.best_scene_id, r.transform, r.overlap)
           for r in results if r.best_scene_id is not None and r.overlap > threshold]
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("".join(format_constraint(c) + "\n" for c in out))
    return out


def parse_constraints(text: str) -> List[Constraint]:
    out = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        p = line.split()
        if p[0] != "CON" or len(p) != 11:
            raise ParseError(lineno, "expected 'CON q s tx ty tz qw qx qy qz overlap'")
        v = [float(x) for x in p[3:]]
        out.append(Constraint(int(p[1]), int(p[2]), RigidTransform.from_quat(v[:3], v[3:7]), v[7]))
    return out


def format_result(r: LocalizationResult) -> str:
    if r.best_scene_id is None:
        return f"RES {r.query_id} - {_f(r.overlap)} {r.candidates_examined}"
    t, q = r.transform.translation, r.transform.quat
    return "RES {} {} {} {} {}".format(r.query_id, r.best_scene_id, " ".join(_f(v) for v in (*t, *q)),
                                       _f(r.overlap), r.candidates_examined)


def parse_results(text: str) -> List[LocalizationResult]:
    out = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        p = line.split()
        try:
            if p[0] != "RES":
                raise ParseError(lineno, "expected RES record")
            if p[2] == "-" and len(p) == 5:
                out.append(LocalizationResult(int(p[1]), None, None, float(p[3]), int(p[4])))
            elif len(p) == 12:
                v = [float(x) for x in p[3:11]]
                out.append(LocalizationResult(int(p[1]), int(p[2]), RigidTransform.from_quat(v[:3], v[3:7]),
                                              v[7], int(p[11])))
            else:
                raise ParseError(lineno, "wrong field count in RES record")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(lineno, str(exc)) from None
    return out


# ------------------------------------------------------------------ multi-session fusion

def fuse_sessions(sessions: Sequence[Tuple[Union[Inventory, GlobalInventory, Sequence[Inventory]], RigidTransform]],
                  assoc_radius: float = 0.5, tau_dbh: float = 0.1,
                  resolution: Optional[float] = None) -> GlobalInventory:
    """Merge per-session inventories into one world-frame inventory.

    Trees are linked when their world centers are closer than ``assoc_radius``
    and their DBH differs by less than ``tau_dbh``; each single-linkage cluster
    keeps the attributes of its smallest-DBH member. ``resolution`` optionally
    rounds the output to storage precision.
    """
    trees: List[TreeRecord] = []
    session_of: List[int] = []
    for s, (inv, T) in enumerate(sessions):
        if isinstance(inv, (Inventory, GlobalInventory)):
            parts = [inv.trees]
        else:
            parts = [i.trees for i in inv]
        for p in parts:
            moved = transform_trees(p, T) if T != RigidTransform.identity() else list(p)
            trees.extend(moved)
            session_of.extend([s] * len(moved))
    n = len(trees)
    if n == 0:
        return GlobalInventory([])
    xy = np.array([t.center for t in trees])
    dbh = np.array([t.dbh for t in trees])
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(xy).query_pairs(assoc_radius)):
        if abs(dbh[i] - dbh[j]) < tau_dbh and math.dist(xy[i], xy[j]) < assoc_radius:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    clusters: Dict[int, List[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    out: List[TreeRecord] = []
    obs: List[int] = []
    used = set()
    pending = []
    for root in sorted(clusters):
        members = clusters[root]
        rep = min(members, key=lambda i: (dbh[i], i))
        pending.append((trees[rep], len(members)))
        used.add(trees[rep].id)
    taken = set()
    next_id = max(used) + 1 if used else 0
    for t, count in pending:
        tid = t.id
        if tid in taken:
            while next_id in taken or next_id in used:
                next_id += 1
            tid = next_id
        taken.add(tid)
        rec = TreeRecord(tid, t.axis, t.center, t.base_height, t.dbh, t.candidate)
        out.append(quantize_tree(rec, resolution) if resolution else rec)
        obs.append(count)
    return GlobalInventory(out, observations=obs)


# ------------------------------------------------------------------ .tdb format

def serialize_database(db: DescriptorDatabase) -> str:
    lines = ["TDB 1"]
    lines += [f"CFG {k} {format_value(v)}" for k, v in db.config.items()]
    for info in db.scenes:
        m = db.models[info.scene_id]
        t, q = info.pose.translation, info.pose.quat
        lines.append("SCENE {} {} {} {}".format(info.scene_id, " ".join(_f(v) for v in (*t, *q)),
                                                info.n_trees, int(info.descriptorless)))
        for tr in m.inventory.trees:
            vals = (*tr.axis, *tr.center, tr.base_height, tr.dbh)
            lines.append(f"TREE {info.scene_id} {tr.id} " + " ".join(_f(v) for v in vals)
                         + f" {int(tr.candidate)}")
        if not info.descriptorless:
            lines.append(f"DESC {info.scene_id} TDH " + " ".join(_f(v) for v in m.tdh))
            lines.append(f"DESC {info.scene_id} PDH " + " ".join(_f(v) for v in m.pdh))
            vid = m.ids[m.tri_verts]
            for h, (a, b, c) in zip(m.tri_hash.tolist(), vid.tolist()):
                lines.append(f"TRI {info.scene_id} {h} {a} {b} {c}")
    return "\n".join(lines) + "\n"


def save_database(db: DescriptorDatabase, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_database(db))


def parse_database(text: str) -> DescriptorDatabase:
    lines = text.split("\n")
    if not lines or lines[0].strip() != "TDB 1":
        raise ParseError(1, "expected header 'TDB 1'")
    cfg_items: Dict[str, str] = {}
    scenes: List[dict] = []
    by_id: Dict[int, dict] = {}
    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        p = line.split()
        tag = p[0]
        try:
            if tag == "CFG":
                if scenes or len(p) != 3:
                    raise ParseError(lineno, "CFG lines must precede scenes and hold one value")
                cfg_items[p[1]] = p[2]
            elif tag == "SCENE":
                if len(p) != 11:
                    raise ParseError(lineno, "bad SCENE record")
                v = [float(x) for x in p[2:9]]
                rec = {"id": int(p[1]), "pose": RigidTransform.from_quat(v[:3], v[3:]), "n": int(p[9]),
                       "flag": p[10] == "1", "trees": [], "desc": {}, "tri": []}
                if rec["id"] in by_id:
                    raise ParseError(lineno, f"duplicate scene {rec['id']}")
                scenes.append(rec)
                by_id[rec["id"]] = rec
            elif tag in ("TREE", "DESC", "TRI"):
                rec = by_id.get(int(p[1]))
                if rec is None:
                    raise ParseError(lineno, f"record for unknown scene {p[1]}")
                if tag == "TREE":
                    if len(p) != 11:
                        raise ParseError(lineno, "bad TREE record")
                    v = [float(x) for x in p[3:10]]
                    rec["trees"].append(TreeRecord(int(p[2]), v[:3], v[3:5], v[5], v[6], p[10] == "1"))
                elif tag == "DESC":
                    if len(p) != 43 or p[2] not in ("TDH", "PDH"):
                        raise ParseError(lineno, "bad DESC record")
                    rec["desc"][p[2]] = np.array([float(x) for x in p[3:]])
                else:
                    if len(p) != 6:
                        raise ParseError(lineno, "bad TRI record")
                    rec["tri"].append((int(p[2]), int(p[3]), int(p[4]), int(p[5])))
            else:
                raise ParseError(lineno, f"unknown record {tag!r}")
        except ParseError:
            raise
        except (ValueError, InventoryError) as exc:
            raise ParseError(lineno, str(exc)) from None
    config = config_from_items(cfg_items)
    db = DescriptorDatabase(config)
    for rec in scenes:
        inv = Inventory(rec["id"], rec["pose"], rec["trees"])
        if len(inv) != rec["n"]:
            raise DatabaseError(f"scene {rec['id']}: tree count mismatch")
        if rec["flag"]:
            db.add(prepare_scene(inv, config, tri_arrays={"verts": np.zeros((0, 3), np.int64),
                                                          "hash": np.zeros(0, np.int64)},
                                 descriptors=(np.zeros(40), np.zeros(40))))
            continue
        if set(rec["desc"]) != {"TDH", "PDH"}:
            raise DatabaseError(f"scene {rec['id']}: missing descriptors")
        row = {tid: i for i, tid in enumerate(inv.arrays["ids"].tolist())}
        tri = np.array(rec["tri"], dtype=np.int64).reshape(-1, 4)
        try:
            verts = np.vectorize(row.__getitem__, otypes=[np.int64])(tri[:, 1:]) if len(tri) else \
                np.zeros((0, 3), np.int64)
        except KeyError as exc:
            raise DatabaseError(f"scene {rec['id']}: triangle references unknown tree {exc}") from None
        db.add(prepare_scene(inv, config, tri_arrays={"verts": verts, "hash": tri[:, 0].copy()},
                             descriptors=(rec["desc"]["TDH"], rec["desc"]["PDH"])))
    return db.finalize()


def load_database(path: str) -> DescriptorDatabase:
    with open(path, encoding="utf-8") as fh:
        return parse_database(fh.read())
