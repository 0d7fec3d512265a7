"""Outlier rejection on shared-hash triangle matches: DBH assignment and yaw voting."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import MatchConfig
from .geometry import wrap_angle
from .triangles import TriangleEntry


@dataclass(frozen=True, eq=False)
class TrianglePair:
    query: TriangleEntry
    candidate: TriangleEntry
    yaw: Optional[float] = None
    dbh_cost: float = 0.0


def dbh_cost_matrix(dq: np.ndarray, dc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Summed and max absolute DBH difference between every query/candidate DBH triple."""
    diff = np.abs(np.asarray(dq, float)[:, None, :] - np.asarray(dc, float)[None, :, :])
    return diff.sum(axis=2), diff.max(axis=2)


def assign_bucket(dq: np.ndarray, dc: np.ndarray, tau_dbh: float) -> List[Tuple[int, int, float]]:
    """Minimum-cost one-to-one assignment inside one hash bucket, then the DBH gate."""
    cost, worst = dbh_cost_matrix(dq, dc)
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c), float(cost[r, c])) for r, c in zip(rows, cols) if worst[r, c] < tau_dbh]


def dbh_filter(query_tris: Sequence[TriangleEntry], cand_tris: Sequence[TriangleEntry],
               cfg: MatchConfig = MatchConfig()) -> List[TrianglePair]:
    if not query_tris or not cand_tris:
        return []
    dq = np.array([t.dbhs for t in query_tris])
    dc = np.array([t.dbhs for t in cand_tris])
    return [TrianglePair(query_tris[r], cand_tris[c], None, cost)
            for r, c, cost in assign_bucket(dq, dc, cfg.tau_dbh)]


def yaw_batch(Pq: np.ndarray, Pc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares 2D rotation angle between corresponding vertex triples.

    Returns ``(yaw, valid)``; a pair is invalid when the optimal orthogonal map is
    a reflection or the cross-covariance is (near) singular.
    """
    Pq = np.asarray(Pq, float).reshape(-1, 3, 2)
    Pc = np.asarray(Pc, float).reshape(-1, 3, 2)
    Q = Pq - Pq.mean(axis=1, keepdims=True)
    C = Pc - Pc.mean(axis=1, keepdims=True)
    H = Q.transpose(0, 2, 1) @ C
    det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
    fro = (H * H).reshape(-1, 4).sum(axis=1)
    valid = det > 1e-9 * fro
    s = H[:, 0, 1] - H[:, 1, 0]
    c = H[:, 0, 0] + H[:, 1, 1]
    return np.arctan2(s, c), valid


def triangle_yaw(pair: TrianglePair) -> Optional[float]:
    """Relative yaw of a triangle pair, or ``None`` for reflections and degenerate shapes."""
    yaw, ok = yaw_batch(np.array(pair.query.vertices), np.array(pair.candidate.vertices))
    return float(yaw[0]) if ok[0] else None


def vote(yaws: np.ndarray, cfg: MatchConfig = MatchConfig()) -> Tuple[np.ndarray, Optional[float]]:
    """Circular-histogram consensus: ``(inlier mask, dominant yaw)``."""
    y = np.asarray(yaws, dtype=float)
    if len(y) == 0:
        return np.zeros(0, dtype=bool), None
    mask, theta = vote_groups(y, np.zeros(len(y), dtype=np.int64), 1, cfg)
    return mask, float(theta[0])


def vote_groups(yaws: np.ndarray, label: np.ndarray, n_groups: int, cfg: MatchConfig = MatchConfig()
                ) -> Tuple[np.ndarray, np.ndarray]:
    """Independent yaw votes for several candidates at once.

    ``label`` assigns each yaw to a group; returns the inlier mask and the
    per-group dominant yaw (NaN for empty groups).
    """
    y = np.asarray(yaws, dtype=float)
    nb = cfg.yaw_bins
    w = 2.0 * math.pi / nb
    idx = np.clip(np.ceil((y + math.pi) / w).astype(np.int64) - 1, 0, nb - 1)
    counts = np.bincount(label * nb + idx, minlength=n_groups * nb).reshape(n_groups, nb)
    best = counts.argmax(axis=1)
    off = (idx - best[label]) % nb
    sel = (off <= 1) | (off == nb - 1)
    S = np.bincount(label, weights=np.where(sel, np.sin(y), 0.0), minlength=n_groups)
    C = np.bincount(label, weights=np.where(sel, np.cos(y), 0.0), minlength=n_groups)
    theta = wrap_angle(np.arctan2(S, C))
    theta = np.where(counts.sum(axis=1) > 0, theta, np.nan)
    # |wrap(y - theta)| without the half-open fix-up, which cannot change a strict comparison
    dist = np.abs(np.mod(y - theta[label] + math.pi, 2.0 * math.pi) - math.pi)
    return dist < cfg.tau_yaw, np.atleast_1d(theta)


def yaw_vote(pairs: Sequence[TrianglePair], cfg: MatchConfig = MatchConfig()
             ) -> Tuple[List[TrianglePair], Optional[float]]:
    if not pairs:
        return [], None
    mask, theta = vote(np.array([p.yaw for p in pairs], dtype=float), cfg)
    return [p for p, keep in zip(pairs, mask) if keep], theta


def with_yaw(pair: TrianglePair) -> Optional[TrianglePair]:
    y = triangle_yaw(pair)
    return None if y is None else replace(pair, yaw=y)


def match_triangle_arrays(q_hash: np.ndarray, q_dbh: np.ndarray, c_hash: np.ndarray, c_dbh: np.ndarray,
                          cfg: MatchConfig = MatchConfig(), c_order: Optional[np.ndarray] = None
                          ) -> Tuple[np.ndarray, np.ndarray]:
    """Index pairs ``(qi, ci)`` of shared-hash triangles surviving the DBH stage.

    Buckets with one triangle on each side are gated directly; larger buckets go
    through the optimal assignment. With ``use_dbh_filter`` off every
    shared-hash combination is kept. ``c_order`` may pass a precomputed stable
    argsort of ``c_hash``.
    """
    corder = np.argsort(c_hash, kind="stable") if c_order is None else c_order
    cs = c_hash[corder]
    lo = np.searchsorted(cs, q_hash, side="left")
    hi = np.searchsorted(cs, q_hash, side="right")
    nc = hi - lo
    hit = np.flatnonzero(nc > 0)
    if len(hit) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if not cfg.use_dbh_filter:
        qi = np.repeat(hit, nc[hit])
        ci = np.concatenate([corder[lo[i]:hi[i]] for i in hit])
        return qi, ci
    # query-side multiplicity of each hit hash
    qh = q_hash[hit]
    qorder = np.argsort(qh, kind="stable")
    qs = qh[qorder]
    nq = np.searchsorted(qs, qh, side="right") - np.searchsorted(qs, qh, side="left")
    simple = (nq == 1) & (nc[hit] == 1)
    qi_s = hit[simple]
    ci_s = corder[lo[qi_s]]
    worst = np.abs(q_dbh[qi_s] - c_dbh[ci_s]).max(axis=1)
    keep = worst < cfg.tau_dbh
    out_q = [qi_s[keep]]
    out_c = [ci_s[keep]]
    multi = hit[~simple]
    if len(multi):
        done = set()
        for i in multi.tolist():
            h = int(q_hash[i])
            if h in done:
                continue
            done.add(h)
            qmem = np.flatnonzero(q_hash == h)
            cmem = corder[lo[i]:hi[i]]
            pairs = assign_bucket(q_dbh[qmem], c_dbh[cmem], cfg.tau_dbh)
            if pairs:
                out_q.append(np.array([qmem[r] for r, _, _ in pairs], dtype=np.int64))
                out_c.append(np.array([cmem[c] for _, c, _ in pairs], dtype=np.int64))
    qi = np.concatenate(out_q)
    ci = np.concatenate(out_c)
    order = np.lexsort((ci, qi))
    return qi[order], ci[order]
