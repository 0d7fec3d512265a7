"""Seeded synthetic forests and scene perturbations.

All randomness comes from numpy's Philox counter-based generator keyed by
``SeedSequence(seed)`` child streams, so fixtures replay bit-identically on
any platform with the same numpy bit-generator algorithms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .geometry import RigidTransform, axis_angle
from .inventory import GlobalInventory, Inventory, TreeRecord, quantize_tree

TERRAIN_WAVES = 8
# random sequential addition jams near 0.547 disk coverage; refuse above this
RSA_JAMMING = 0.5
# millimetre rounding moves two stems together by at most sqrt(2) mm
SPACING_GUARD = 1.5e-3


class GenerationError(RuntimeError):
    pass


def philox(seed, *path: int) -> np.random.Generator:
    """Generator on the child stream ``path`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed))
    for k in path:
        ss = ss.spawn(k + 1)[k]
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ForestParams:
    extent: Tuple[float, float] = (100.0, 100.0)
    density: float = 400.0  # trees per hectare
    min_spacing: float = 2.0
    dbh_range: Tuple[float, float] = (0.1, 0.6)
    lean_max: float = 5.0  # degrees
    terrain_amplitude: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if len(self.extent) != 2 or min(self.extent) <= 0:
            raise ValueError("extent must be two positive lengths")
        if not self.density > 0:
            raise ValueError("density must be positive")
        if not self.min_spacing > 0:
            raise ValueError("min_spacing must be positive")
        lo, hi = self.dbh_range
        if not 0 < lo <= hi < 5.0:
            raise ValueError("dbh_range must satisfy 0 < lo <= hi < 5")
        if not 0 <= self.lean_max < 90:
            raise ValueError("lean_max must be in [0, 90) degrees")
        if self.terrain_amplitude < 0:
            raise ValueError("terrain_amplitude must be non-negative")

    @property
    def n_trees(self) -> int:
        return int(round(self.extent[0] * self.extent[1] * self.density / 1e4))


@dataclass(frozen=True)
class PerturbationParams:
    transform: RigidTransform = field(default_factory=RigidTransform.identity)
    center_noise_sigma: float = 0.0
    dbh_noise_sigma: float = 0.0
    axis_noise_sigma: float = 0.0  # degrees
    dropout_rate: float = 0.0
    clutter_rate: float = 0.0
    seed: int = 0
    base_noise_sigma: float = 0.0

    def __post_init__(self):
        if min(self.center_noise_sigma, self.dbh_noise_sigma, self.axis_noise_sigma, self.base_noise_sigma) < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be non-negative")


def terrain_field(amplitude: float, seed: int):
    """Smooth height field: a scaled sum of eight seeded plane waves."""
    rng = philox(seed, 3)
    wavelength = rng.uniform(20.0, 80.0, TERRAIN_WAVES)
    heading = rng.uniform(-math.pi, math.pi, TERRAIN_WAVES)
    phase = rng.uniform(-math.pi, math.pi, TERRAIN_WAVES)
    k = (2 * math.pi / wavelength)[:, None] * np.column_stack([np.cos(heading), np.sin(heading)])

    def height(xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, float))
        return amplitude / TERRAIN_WAVES * np.sin(xy @ k.T + phase).sum(axis=1)

    return height


def _place(p: ForestParams, rng: np.random.Generator) -> np.ndarray:
    n = p.n_trees
    ex, ey = p.extent
    s = p.min_spacing + SPACING_GUARD
    fill = n * math.pi * (p.min_spacing / 2) ** 2 / (ex * ey)
    if fill > RSA_JAMMING:
        raise GenerationError(f"density {p.density}/ha cannot be packed at spacing {s} m (fill {fill:.2f})")
    cell = s / math.sqrt(2)
    gx, gy = int(math.ceil(ex / cell)), int(math.ceil(ey / cell))
    grid = -np.ones((gx, gy), dtype=np.int64)
    pts = np.zeros((n, 2))
    placed = 0
    budget = 200 * n + 1000
    batch = 256
    s2 = s * s
    while placed < n:
        if budget <= 0:
            raise GenerationError(f"placed {placed} of {n} trees before exhausting attempts")
        cand = rng.random((batch, 2)) * (ex, ey)
        budget -= batch
        for x, y in cand:
            i, j = min(int(x / cell), gx - 1), min(int(y / cell), gy - 1)
            nb = grid[max(i - 2, 0): i + 3, max(j - 2, 0): j + 3]
            nb = nb[nb >= 0]
            if len(nb):
                d = pts[nb] - (x, y)
                if np.min(np.einsum("ij,ij->i", d, d)) < s2:
                    continue
            pts[placed] = (x, y)
            grid[i, j] = placed
            placed += 1
            if placed == n:
                break
    return pts


def generate_forest(p: ForestParams) -> GlobalInventory:
    """Random sequential placement honoring ``min_spacing``, rounded to millimetres."""
    pts = _place(p, philox(p.seed, 0))
    n = len(pts)
    rng = philox(p.seed, 1)
    dbh = rng.uniform(p.dbh_range[0], p.dbh_range[1], n)
    lean = np.radians(rng.uniform(0.0, p.lean_max, n))
    az = rng.uniform(-math.pi, math.pi, n)
    axes = np.column_stack([np.sin(lean) * np.cos(az), np.sin(lean) * np.sin(az), np.cos(lean)])
    base = terrain_field(p.terrain_amplitude, p.seed)(pts) if n else np.zeros(0)
    trees = [quantize_tree(TreeRecord(i, axes[i], pts[i], base[i], dbh[i])) for i in range(n)]
    return GlobalInventory(trees)


def _tilt(axes: np.ndarray, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate each axis by a Gaussian angle about a random perpendicular direction."""
    n = len(axes)
    ang = np.radians(rng.normal(0.0, sigma_deg, n))
    r = rng.normal(size=(n, 3))
    perp = np.cross(axes, r)
    norm = np.linalg.norm(perp, axis=1, keepdims=True)
    perp = np.where(norm > 1e-12, perp / np.maximum(norm, 1e-12), np.array([1.0, 0.0, 0.0]))
    out = axes * np.cos(ang)[:, None] + perp * np.sin(ang)[:, None]
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def dropout_mask(n: int, rate: float, seed: int) -> np.ndarray:
    """Survivor mask; each tree is kept when its uniform draw is at least ``rate``."""
    return philox(seed, 1).random(n) >= rate


def perturb_scene(scene: Inventory, p: PerturbationParams) -> Inventory:
    """Move a scene by ``p.transform`` and corrupt it with noise, dropout and clutter.

    The returned inventory's pose is ``scene.pose @ p.transform.inverse()`` so
    that ``p.transform.inverse()`` maps the output frame back to the input frame.
    """
    T = p.transform
    a = scene.arrays
    n = len(scene)
    ids = a["ids"].copy()
    pos = np.column_stack([a["centers"], a["base"]])
    axes = a["axes"].copy()
    dbh = a["dbh"].copy()
    cand = a["candidate"].copy()

    keep = dropout_mask(n, p.dropout_rate, p.seed) if p.dropout_rate > 0 else np.ones(n, bool)
    n_keep = int(keep.sum())
    n_clutter = int(round(p.clutter_rate * n_keep))
    if n_clutter:
        rng = philox(p.seed, 2)
        radius = float(np.max(np.linalg.norm(a["centers"], axis=1))) if n else 10.0
        rho = radius * np.sqrt(rng.random(n_clutter))
        phi = rng.uniform(-math.pi, math.pi, n_clutter)
        lo, hi = (float(dbh.min()), float(dbh.max())) if n else (0.1, 0.5)
        b_lo, b_hi = (float(a["base"].min()), float(a["base"].max())) if n else (0.0, 0.0)
        c_pos = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), rng.uniform(b_lo, b_hi, n_clutter)])
        c_axes = np.tile([0.0, 0.0, 1.0], (n_clutter, 1))
        c_dbh = rng.uniform(lo, hi, n_clutter)
        start = int(ids.max()) + 1 if n else 0
        c_ids = np.arange(start, start + n_clutter)
    else:
        c_pos = np.zeros((0, 3)); c_axes = np.zeros((0, 3)); c_dbh = np.zeros(0)
        c_ids = np.zeros(0, dtype=np.int64)

    pos = np.vstack([pos[keep], c_pos])
    axes = np.vstack([axes[keep], c_axes])
    dbh = np.concatenate([dbh[keep], c_dbh])
    ids = np.concatenate([ids[keep], c_ids]).astype(np.int64)
    cand = np.concatenate([cand[keep], np.zeros(n_clutter, bool)])

    pos = T.apply(pos) if len(pos) else pos
    axes = axes @ T.rotation.T
    m = len(pos)
    rng = philox(p.seed, 0)
    if p.center_noise_sigma > 0:
        pos[:, :2] += rng.normal(0.0, p.center_noise_sigma, (m, 2))
    if p.dbh_noise_sigma > 0:
        dbh = np.clip(dbh + rng.normal(0.0, p.dbh_noise_sigma, m), 1e-3, 4.999)
    if p.axis_noise_sigma > 0:
        axes = _tilt(axes, p.axis_noise_sigma, rng)
    if p.base_noise_sigma > 0:
        pos[:, 2] += rng.normal(0.0, p.base_noise_sigma, m)
    trees = [TreeRecord(int(ids[i]), axes[i], pos[i, :2], pos[i, 2], dbh[i], bool(cand[i])) for i in range(m)]
    return Inventory(scene.scene_id, scene.pose @ T.inverse(), trees)


def random_rotation(rng: np.random.Generator, max_tilt_deg: float = 90.0) -> np.ndarray:
    """Uniform yaw composed with a tilt of up to ``max_tilt_deg`` about a random horizontal axis."""
    yaw = rng.uniform(-math.pi, math.pi)
    tilt = math.radians(rng.uniform(-max_tilt_deg, max_tilt_deg))
    h = rng.uniform(-math.pi, math.pi)
    return axis_angle((math.cos(h), math.sin(h), 0.0), tilt) @ axis_angle((0.0, 0.0, 1.0), yaw)


def random_transform(rng: np.random.Generator, max_tilt_deg: float = 90.0, max_shift: float = 5.0
                     ) -> RigidTransform:
    return RigidTransform(random_rotation(rng, max_tilt_deg), rng.uniform(-max_shift, max_shift, 3))


def grid_centers(extent: Sequence[float], spacing: float, margin: float) -> List[Tuple[float, float]]:
    xs = np.arange(margin, extent[0] - margin + 1e-9, spacing)
    ys = np.arange(margin, extent[1] - margin + 1e-9, spacing)
    return [(float(x), float(y)) for y in ys for x in xs]
