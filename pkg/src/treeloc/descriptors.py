"""Tree distribution (TDH) and pairwise distance (PDH) histograms for coarse retrieval."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .config import CoarseConfig

CHI_EPS = 1e-10
TDH, PDH = "TDH", "PDH"


@dataclass(frozen=True, eq=False)
class HistogramDescriptor:
    kind: str
    bins: np.ndarray
    scene_id: int = 0

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=float).reshape(-1)
        if b.shape != (40,):
            raise ValueError("descriptor must have 40 bins")
        if np.any(b < 0):
            raise ValueError("descriptor bins must be non-negative")
        if self.kind not in (TDH, PDH):
            raise ValueError(f"unknown descriptor kind {self.kind!r}")
        object.__setattr__(self, "bins", b)


def overlapping_bins(lo: float, hi: float, n: int, overlap: float) -> np.ndarray:
    """``(n, 2)`` half-open intervals: ``n`` equal cells widened by ``overlap / 2`` each side."""
    step = (hi - lo) / n
    starts = lo + step * np.arange(n)
    return np.column_stack([starts - overlap / 2.0, starts + step + overlap / 2.0])


def _smooth_2x2(H: np.ndarray) -> np.ndarray:
    """Average each cell with its right, lower and lower-right neighbours (clamped at edges)."""
    nr, nd = H.shape
    P = np.zeros((nr + 1, nd + 1))
    C = np.zeros((nr + 1, nd + 1))
    P[:nr, :nd] = H
    C[:nr, :nd] = 1.0
    S = P[:-1, :-1] + P[1:, :-1] + P[:-1, 1:] + P[1:, 1:]
    N = C[:-1, :-1] + C[1:, :-1] + C[:-1, 1:] + C[1:, 1:]
    return S / N


def tdh_counts(radii: np.ndarray, dbhs: np.ndarray, cfg: CoarseConfig) -> np.ndarray:
    """Raw ``n_r x n_d`` overlapped-bin counts before smoothing."""
    rb = overlapping_bins(cfg.r_min, cfg.r_max, cfg.n_r, cfg.w_r)
    db = overlapping_bins(cfg.d_min, cfg.d_max, cfg.n_d, cfg.w_d)
    r = np.asarray(radii, dtype=float)
    d = np.asarray(dbhs, dtype=float)
    ok = (r >= cfg.r_min) & (r <= cfg.r_max) & (d >= cfg.d_min) & (d <= cfg.d_max)
    r, d = r[ok], d[ok]
    in_r = (r[:, None] >= rb[:, 0]) & (r[:, None] < rb[:, 1])
    in_d = (d[:, None] >= db[:, 0]) & (d[:, None] < db[:, 1])
    return in_r.T.astype(float) @ in_d.astype(float)


def compute_tdh(centers, dbhs, cfg: CoarseConfig = CoarseConfig(), scene_id: int = 0) -> HistogramDescriptor:
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.hypot(c[:, 0], c[:, 1])
    H = _smooth_2x2(tdh_counts(radii, dbhs, cfg))
    return HistogramDescriptor(TDH, H.reshape(-1), scene_id)


def pairwise_distances(centers: np.ndarray) -> np.ndarray:
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    i, j = np.triu_indices(len(c), k=1)
    d = c[i] - c[j]
    return np.hypot(d[:, 0], d[:, 1])


def compute_pdh(centers, cfg: CoarseConfig = CoarseConfig(), scene_id: int = 0) -> HistogramDescriptor:
    d = pairwise_distances(centers)
    d = d[(d >= cfg.l_min) & (d <= cfg.l_max)]
    width = (cfg.l_max - cfg.l_min) / cfg.n_bins_pdh
    idx = np.minimum(((d - cfg.l_min) / width).astype(np.int64), cfg.n_bins_pdh - 1)
    bins = np.bincount(idx, minlength=cfg.n_bins_pdh).astype(float)
    return HistogramDescriptor(PDH, bins, scene_id)


def chi_square(h1, h2) -> float:
    a = np.asarray(getattr(h1, "bins", h1), dtype=float)
    b = np.asarray(getattr(h2, "bins", h2), dtype=float)
    if a.shape != b.shape:
        raise ValueError("histograms must have equal length")
    return float(np.sum((a - b) ** 2 / (a + b + CHI_EPS)))


def chi_square_many(h: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Chi-square distance from one histogram to every row of ``table``."""
    return chi_square_columns(h, np.asarray(table, float).T)


def chi_square_columns(h: np.ndarray, table_t: np.ndarray) -> np.ndarray:
    """Chi-square distance to every column of a bin-major ``(n_bins, n_scenes)`` table.

    Accumulating bin by bin keeps the temporaries cache-sized, several times
    faster than the row-major reduction on large databases.
    """
    n = table_t.shape[1]
    acc = np.zeros(n)
    d = np.empty(n)
    s = np.empty(n)
    for j, hj in enumerate(np.asarray(h, float).tolist()):
        np.subtract(table_t[j], hj, out=d)
        d *= d
        np.add(table_t[j], hj + CHI_EPS, out=s)
        d /= s
        acc += d
    return acc


def _minmax(d: np.ndarray) -> np.ndarray:
    lo, hi = d.min(), d.max()
    if hi == lo:
        return np.zeros_like(d)
    return (d - lo) / (hi - lo)


def coarse_scores(q_tdh: np.ndarray, q_pdh: np.ndarray, tdh_table: np.ndarray, pdh_table: np.ndarray,
                  bin_major: bool = False) -> np.ndarray:
    """``-(norm chi2_TDH + norm chi2_PDH)`` per database row (per column when ``bin_major``)."""
    dist = chi_square_columns if bin_major else chi_square_many
    return -(_minmax(dist(q_tdh, tdh_table)) + _minmax(dist(q_pdh, pdh_table)))


def top_k(scene_ids: np.ndarray, scores: np.ndarray, k: int) -> List[Tuple[int, float]]:
    """Highest scores first, ties by ascending scene id."""
    k = min(k, len(scene_ids))
    if k < len(scene_ids):
        # prefilter with a partition, then resolve ties exactly at the cut
        cut = np.partition(scores, len(scores) - k)[len(scores) - k]
        keep = np.flatnonzero(scores >= cut)
    else:
        keep = np.arange(len(scene_ids))
    order = keep[np.lexsort((scene_ids[keep], -scores[keep]))][:k]
    return [(int(scene_ids[i]), float(scores[i])) for i in order]


def coarse_retrieve(query: Tuple[HistogramDescriptor, HistogramDescriptor],
                    db: Sequence[Tuple[HistogramDescriptor, HistogramDescriptor]],
                    k: int = 100) -> List[Tuple[int, float]]:
    """Rank database scenes by ``-(norm chi2 TDH + norm chi2 PDH)``.

    ``query`` and every ``db`` entry are ``(tdh, pdh)`` pairs; scene ids come
    from the database descriptors.
    """
    if not db:
        raise ValueError("database is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = np.array([t.scene_id for t, _ in db], dtype=np.int64)
    T = np.vstack([t.bins for t, _ in db])
    P = np.vstack([p.bins for _, p in db])
    return top_k(ids, coarse_scores(query[0].bins, query[1].bins, T, P), k)
