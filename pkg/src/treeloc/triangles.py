"""2D triangle descriptors over stem centers, quantized hashing and multiset scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .config import HashConfig
from .inventory import TreeRecord


@dataclass(frozen=True, eq=False)
class TriangleEntry:
    """A hashed triangle with vertices labeled by their opposite side (v1 opposite the shortest)."""

    hash: int
    side_lengths: Tuple[float, float, float]
    area: float
    dbhs: Tuple[float, float, float]
    axes: Tuple[Tuple[float, float, float], ...]
    base_heights: Tuple[float, float, float]
    vertex_ids: Tuple[int, int, int]
    centroid: Tuple[float, float]
    scene_id: int
    vertices: Tuple[Tuple[float, float], ...] = ()


def hash_triangle(lengths: Sequence[float], area: float, cfg: HashConfig = HashConfig()) -> int:
    """Quantized permutation-invariant key of a triangle with ascending side lengths."""
    l1, l2, l3 = (int(math.floor(float(v) / cfg.delta_l)) for v in lengths)
    aq = int(math.floor(float(area) / cfg.delta_l))
    rho, U = int(cfg.rho), int(cfg.U)
    h = ((l3 * rho + l2) % U * rho + l1) % U
    return (h * rho + aq) % U


def hash_many(lengths: np.ndarray, area: np.ndarray, cfg: HashConfig = HashConfig()) -> np.ndarray:
    """Vectorized :func:`hash_triangle`; exact in int64 while quantized values stay below 2**40."""
    L = np.floor(np.asarray(lengths, dtype=float) / cfg.delta_l).astype(np.int64)
    A = np.floor(np.asarray(area, dtype=float) / cfg.delta_l).astype(np.int64)
    if L.size and (L.max() >= 2**40 or A.max() >= 2**40):
        return np.array([hash_triangle(l, a, cfg) for l, a in zip(lengths, area)], dtype=np.int64)
    rho, U = np.int64(cfg.rho), np.int64(cfg.U)
    if U > 2**33 or rho > 2**25:
        return np.array([hash_triangle(l, a, cfg) for l, a in zip(lengths, area)], dtype=np.int64)
    h = (L[:, 2] * rho + L[:, 1]) % U
    h = (h * rho + L[:, 0]) % U
    return (h * rho + A) % U


def triangle_arrays(xy: np.ndarray, ids: np.ndarray, cfg: HashConfig = HashConfig()) -> Dict[str, np.ndarray]:
    """Triangles over k-nearest-neighbour pairs, as a struct of arrays.

    ``verts`` holds row indices into ``xy`` ordered so vertex v is opposite the
    v-th shortest side (ties by ascending tree id).
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    ids = np.asarray(ids, dtype=np.int64)
    n = len(xy)
    empty = {
        "verts": np.zeros((0, 3), dtype=np.int64), "sides": np.zeros((0, 3)), "area": np.zeros(0),
        "centroid": np.zeros((0, 2)), "hash": np.zeros(0, dtype=np.int64),
    }
    if n < 3:
        return empty
    m = min(cfg.m_neighbors, n - 1)
    if n <= 64:
        D = np.sum((xy[:, None, :] - xy[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(D, np.inf)
        nbr = np.argsort(D, axis=1, kind="stable")[:, :m]
    else:
        _, nbr = cKDTree(xy).query(xy, k=m + 1)
        nbr = nbr[:, 1:]
    pj, pk = np.triu_indices(m, k=1)
    anchors = np.repeat(np.arange(n), len(pj))
    tri = np.column_stack([anchors, nbr[:, pj].reshape(-1), nbr[:, pk].reshape(-1)])
    tri.sort(axis=1)
    code = (tri[:, 0] * n + tri[:, 1]) * n + tri[:, 2]
    _, first = np.unique(code, return_index=True)
    tri = tri[np.sort(first)]
    tri = tri[np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0]))]

    A, B, C = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    opp = np.column_stack([np.hypot(*(B - C).T), np.hypot(*(A - C).T), np.hypot(*(A - B).T)])
    cross = (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1]) - (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0])
    area = 0.5 * np.abs(cross)
    order = np.lexsort((ids[tri], opp), axis=-1)
    verts = np.take_along_axis(tri, order, axis=1)
    sides = np.take_along_axis(opp, order, axis=1)
    ok = (sides[:, 0] >= cfg.min_side) & (area >= cfg.min_area)
    verts, sides, area = verts[ok], sides[ok], area[ok]
    if len(verts) == 0:
        return empty
    centroid = xy[verts].mean(axis=1)
    return {"verts": verts, "sides": sides, "area": area, "centroid": centroid,
            "hash": hash_many(sides, area, cfg)}


def build_triangles(projected: Sequence[Tuple[int, Sequence[float]]], attrs: Mapping[int, TreeRecord],
                    cfg: HashConfig = HashConfig(), scene_id: int = 0) -> List[TriangleEntry]:
    if len(projected) < 3:
        return []
    ids = np.array([p[0] for p in projected], dtype=np.int64)
    xy = np.array([p[1] for p in projected], dtype=float)
    arr = triangle_arrays(xy, ids, cfg)
    return entries_from_arrays(arr, ids, xy, attrs, scene_id)


def entries_from_arrays(arr: Dict[str, np.ndarray], ids: np.ndarray, xy: np.ndarray,
                        attrs: Mapping[int, TreeRecord], scene_id: int) -> List[TriangleEntry]:
    out = []
    for t in range(len(arr["hash"])):
        v = arr["verts"][t]
        recs = [attrs[int(ids[i])] for i in v]
        out.append(TriangleEntry(
            hash=int(arr["hash"][t]),
            side_lengths=tuple(float(s) for s in arr["sides"][t]),
            area=float(arr["area"][t]),
            dbhs=tuple(r.dbh for r in recs),
            axes=tuple(r.axis for r in recs),
            base_heights=tuple(r.base_height for r in recs),
            vertex_ids=tuple(int(ids[i]) for i in v),
            centroid=tuple(float(c) for c in arr["centroid"][t]),
            scene_id=int(scene_id),
            vertices=tuple(tuple(float(c) for c in xy[i]) for i in v),
        ))
    return out


def hash_counts(hashes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.unique(np.asarray(hashes, dtype=np.int64), return_counts=True)


def multiset_score(q_uniq: np.ndarray, q_cnt: np.ndarray, c_uniq: np.ndarray, c_cnt: np.ndarray) -> int:
    """Shared-hash count honoring multiplicities: sum over common keys of min frequency."""
    _, qi, ci = np.intersect1d(q_uniq, c_uniq, assume_unique=True, return_indices=True)
    return int(np.minimum(q_cnt[qi], c_cnt[ci]).sum())


class HashIndex:
    """Hash -> triangle multimap over database scenes, with per-scene hash multisets."""

    def __init__(self):
        self.scenes: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        self._multimap: Dict[int, List[Tuple[int, int]]] | None = None
        self._raw: Dict[int, np.ndarray] = {}
        self._inverted: Tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def add(self, scene_id: int, hashes: np.ndarray) -> None:
        scene_id = int(scene_id)
        if scene_id in self.scenes:
            raise ValueError(f"scene {scene_id} already indexed")
        h = np.asarray(hashes, dtype=np.int64)
        self._raw[scene_id] = h
        self.scenes[scene_id] = hash_counts(h)
        self._multimap = None
        self._inverted = None

    def prepare(self) -> None:
        """Build the inverted file now rather than on the first query."""
        self._postings()

    def _postings(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Inverted file: unique hashes of every scene sorted by hash, with scene ids and counts."""
        if self._inverted is None:
            sids = sorted(self.scenes)
            if sids:
                h = np.concatenate([self.scenes[s][0] for s in sids])
                c = np.concatenate([self.scenes[s][1] for s in sids])
                lab = np.repeat(np.array(sids, dtype=np.int64), [len(self.scenes[s][0]) for s in sids])
            else:
                h = c = lab = np.zeros(0, dtype=np.int64)
            o = np.argsort(h, kind="stable")
            self._inverted = (h[o], lab[o], c[o])
        return self._inverted

    def lookup(self, h: int) -> List[Tuple[int, int]]:
        """All ``(scene_id, triangle_index)`` entries stored under hash ``h``."""
        if self._multimap is None:
            mm: Dict[int, List[Tuple[int, int]]] = {}
            for sid in sorted(self._raw):
                for i, hv in enumerate(self._raw[sid].tolist()):
                    mm.setdefault(hv, []).append((sid, i))
            self._multimap = mm
        return self._multimap.get(int(h), [])

    def scores(self, q_hashes: np.ndarray, candidate_scenes: Sequence[int]) -> np.ndarray:
        q_uniq, q_cnt = hash_counts(q_hashes)
        cands = [int(c) for c in candidate_scenes]
        if not cands or len(q_uniq) == 0:
            return np.zeros(len(cands), dtype=np.int64)
        hs, lab, cnt = self._postings()
        lo = np.searchsorted(hs, q_uniq, side="left")
        n = np.searchsorted(hs, q_uniq, side="right") - lo
        tot = int(n.sum())
        if tot == 0:
            return np.zeros(len(cands), dtype=np.int64)
        # expand the posting ranges of every query hash
        qrow = np.repeat(np.arange(len(q_uniq)), n)
        pos = np.arange(tot) - np.repeat(np.cumsum(n) - n, n) + np.repeat(lo, n)
        slot = {c: k for k, c in enumerate(cands)}
        if len(slot) != len(cands):
            raise ValueError("duplicate candidate scene ids")
        top = int(max(lab[pos].max(), max(cands))) + 1
        lut = np.full(top, -1, dtype=np.int64)
        lut[np.array(cands, dtype=np.int64)] = np.arange(len(cands))
        k = lut[lab[pos]]
        sel = k >= 0
        contrib = np.minimum(cnt[pos[sel]], q_cnt[qrow[sel]])
        return np.bincount(k[sel], weights=contrib, minlength=len(cands)).astype(np.int64)


def fine_retrieve(query_triangles, candidate_scenes: Sequence[int], index: HashIndex,
                  k: int = 10) -> List[Tuple[int, int]]:
    """Rank candidates by the multiset score, ties by ascending scene id."""
    if isinstance(query_triangles, np.ndarray):
        qh = query_triangles
    else:
        qh = np.array([t.hash for t in query_triangles], dtype=np.int64)
    cands = np.array([int(c) for c in candidate_scenes], dtype=np.int64)
    if len(cands) == 0:
        return []
    S = index.scores(qh, cands)
    order = np.lexsort((cands, -S))[:k]
    return [(int(cands[i]), int(S[i])) for i in order]
