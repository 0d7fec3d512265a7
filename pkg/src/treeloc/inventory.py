"""Digital forest inventory: tree records, scenes, the .dfi text format and spatial queries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import RigidTransform

DEDUP_RADIUS = 0.3
MIN_TREES = 10
GRID_CELL = 10.0
MAX_DBH = 5.0


class InventoryError(ValueError):
    """Validation failure on inventory data."""


class ParseError(InventoryError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class TreeRecord:
    id: int
    axis: Tuple[float, float, float]
    center: Tuple[float, float]
    base_height: float
    dbh: float
    candidate: bool = False

    def __post_init__(self):
        axis = tuple(float(v) for v in self.axis)
        center = tuple(float(v) for v in self.center)
        if len(axis) != 3 or len(center) != 2:
            raise InventoryError("axis must have 3 and center 2 components")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "base_height", float(self.base_height))
        object.__setattr__(self, "dbh", float(self.dbh))
        object.__setattr__(self, "candidate", bool(self.candidate))
        norm = math.sqrt(sum(v * v for v in axis))
        if abs(norm - 1.0) > 1e-9:
            raise InventoryError(f"tree {self.id}: axis not unit length (|a| = {norm!r})")
        if not (0.0 < self.dbh < MAX_DBH):
            raise InventoryError(f"tree {self.id}: dbh {self.dbh!r} out of (0, {MAX_DBH})")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], self.base_height])


def _tree_arrays(trees: Sequence[TreeRecord]) -> Dict[str, np.ndarray]:
    n = len(trees)
    return {
        "ids": np.fromiter((t.id for t in trees), dtype=np.int64, count=n),
        "axes": np.array([t.axis for t in trees], dtype=float).reshape(n, 3),
        "centers": np.array([t.center for t in trees], dtype=float).reshape(n, 2),
        "base": np.fromiter((t.base_height for t in trees), dtype=float, count=n),
        "dbh": np.fromiter((t.dbh for t in trees), dtype=float, count=n),
        "candidate": np.fromiter((t.candidate for t in trees), dtype=bool, count=n),
    }


def trees_from_arrays(ids, axes, centers, base, dbh, candidate=None) -> List[TreeRecord]:
    n = len(ids)
    if candidate is None:
        candidate = np.zeros(n, dtype=bool)
    return [
        TreeRecord(int(ids[i]), tuple(axes[i].tolist()), tuple(centers[i].tolist()),
                   float(base[i]), float(dbh[i]), bool(candidate[i]))
        for i in range(n)
    ]


@dataclass(frozen=True, eq=False)
class Inventory:
    """One scene: reference pose plus its trees in the scene's local frame."""

    scene_id: int
    pose: RigidTransform
    trees: Tuple[TreeRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "scene_id", int(self.scene_id))
        seen = set()
        for t in self.trees:
            if t.id in seen:
                raise InventoryError(f"duplicate tree id {t.id} in scene {self.scene_id}")
            seen.add(t.id)

    def __len__(self) -> int:
        return len(self.trees)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Inventory):
            return NotImplemented
        return self.scene_id == other.scene_id and self.pose == other.pose and self.trees == other.trees

    @cached_property
    def arrays(self) -> Dict[str, np.ndarray]:
        return _tree_arrays(self.trees)

    @property
    def positions(self) -> np.ndarray:
        a = self.arrays
        return np.column_stack([a["centers"], a["base"]])


class GlobalInventory:
    """All trees in one world frame, with a uniform grid index over stem centers."""

    def __init__(self, trees: Iterable[TreeRecord], cell: float = GRID_CELL,
                 observations: Optional[Sequence[int]] = None):
        self.trees: Tuple[TreeRecord, ...] = tuple(trees)
        ids = [t.id for t in self.trees]
        if len(set(ids)) != len(ids):
            raise InventoryError("tree ids must be unique in a global inventory")
        self.cell = float(cell)
        self.observations = tuple(observations) if observations is not None else (1,) * len(self.trees)
        if len(self.observations) != len(self.trees):
            raise InventoryError("one observation count per tree required")
        self.arrays = _tree_arrays(self.trees)
        self._index: Dict[Tuple[int, int], np.ndarray] = {}
        if self.trees:
            keys = np.floor(self.arrays["centers"] / self.cell).astype(np.int64)
            order = np.lexsort((keys[:, 1], keys[:, 0]))
            sk = keys[order]
            brk = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
            for chunk in np.split(order, brk):
                k = keys[chunk[0]]
                self._index[(int(k[0]), int(k[1]))] = np.sort(chunk)

    def __len__(self) -> int:
        return len(self.trees)

    def bounds(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        if not self.trees:
            return None
        c = self.arrays["centers"]
        return c.min(axis=0), c.max(axis=0)

    def indices_in_disk(self, center: Sequence[float], radius: float) -> np.ndarray:
        if not self.trees:
            return np.zeros(0, dtype=np.int64)
        cx, cy = float(center[0]), float(center[1])
        i0, i1 = math.floor((cx - radius) / self.cell), math.floor((cx + radius) / self.cell)
        j0, j1 = math.floor((cy - radius) / self.cell), math.floor((cy + radius) / self.cell)
        if (i1 - i0 + 1) * (j1 - j0 + 1) > len(self._index):
            chunks = [v for (i, j), v in self._index.items() if i0 <= i <= i1 and j0 <= j <= j1]
        else:
            chunks = [self._index[(i, j)] for i in range(i0, i1 + 1) for j in range(j0, j1 + 1)
                      if (i, j) in self._index]
        if not chunks:
            return np.zeros(0, dtype=np.int64)
        cand = np.sort(np.concatenate(chunks))
        d = self.arrays["centers"][cand] - (cx, cy)
        return cand[np.einsum("ij,ij->i", d, d) <= radius * radius]


def radius_query(g: GlobalInventory, center: Sequence[float], radius: float,
                 scene_id: int = 0) -> Inventory:
    """Trees within ``radius`` of ``center``, re-expressed in a frame centered there."""
    if not radius > 0:
        raise InventoryError("radius must be positive")
    idx = g.indices_in_disk(center, radius)
    a = g.arrays
    pose = RigidTransform(np.eye(3), [float(center[0]), float(center[1]), 0.0])
    trees = trees_from_arrays(a["ids"][idx], a["axes"][idx], a["centers"][idx] - np.asarray(center[:2], float),
                              a["base"][idx], a["dbh"][idx], a["candidate"][idx])
    return Inventory(scene_id, pose, trees)


def transform_trees(trees: Sequence[TreeRecord], T: RigidTransform) -> List[TreeRecord]:
    """Apply a rigid transform to stem positions ``(cx, cy, base_h)`` and axes."""
    if not trees:
        return []
    a = _tree_arrays(trees)
    pos = T.apply(np.column_stack([a["centers"], a["base"]]))
    axes = a["axes"] @ T.rotation.T
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return trees_from_arrays(a["ids"], axes, pos[:, :2], pos[:, 2], a["dbh"], a["candidate"])


def augment_window(current: Inventory, history: Sequence[Inventory], trajectory: Sequence[RigidTransform],
                   min_trees: int = MIN_TREES, dedup_radius: float = DEDUP_RADIUS) -> Inventory:
    """Top up a sparse local inventory with trees from up to five preceding inventories.

    ``history`` is ordered most recent first and ``trajectory[i]`` maps frame
    ``history[i]`` into the current frame. Reconstructed trees are merged first;
    candidate stems are added by descending observation count only if the scene
    is still short of ``min_trees``.
    """
    if len(history) != len(trajectory):
        raise ValueError("history and trajectory must have equal length")
    if len(history) > 5:
        raise ValueError("at most 5 preceding inventories are used")
    n_rec = sum(not t.candidate for t in current.trees)
    if n_rec >= min_trees:
        return current

    out: List[TreeRecord] = list(current.trees)
    used_ids = {t.id for t in out}
    next_id = max(used_ids, default=-1) + 1
    placed = [t.center for t in out if not t.candidate]

    def near(c, pts) -> bool:
        r2 = dedup_radius * dedup_radius
        return any((c[0] - p[0]) ** 2 + (c[1] - p[1]) ** 2 < r2 for p in pts)

    moved = [transform_trees(h.trees, T) for h, T in zip(history, trajectory)]

    def fresh_id(t: TreeRecord) -> int:
        nonlocal next_id
        if t.id not in used_ids:
            used_ids.add(t.id)
            return t.id
        while next_id in used_ids:
            next_id += 1
        used_ids.add(next_id)
        return next_id

    for trees in moved:
        for t in trees:
            if t.candidate or near(t.center, placed):
                continue
            out.append(TreeRecord(fresh_id(t), t.axis, t.center, t.base_height, t.dbh, False))
            placed.append(t.center)
            n_rec += 1

    if n_rec < min_trees:
        # cluster candidate stems across the window; cluster size = observation frequency
        clusters: List[List[TreeRecord]] = []
        already = [t for t in out if t.candidate]
        for t in already:
            clusters.append([t])
        for trees in moved:
            for t in trees:
                if not t.candidate or near(t.center, placed):
                    continue
                for cl in clusters:
                    if near(t.center, [cl[0].center]):
                        cl.append(t)
                        break
                else:
                    clusters.append([t])
        in_current = {id(t) for t in already}
        ranked = sorted(range(len(clusters)), key=lambda i: (-len(clusters[i]), i))
        count = n_rec
        for i in ranked:
            if count >= min_trees:
                break
            rep = clusters[i][0]
            if id(rep) in in_current:
                continue
            out.append(TreeRecord(fresh_id(rep), rep.axis, rep.center, rep.base_height, rep.dbh, True))
            count += 1
    return Inventory(current.scene_id, current.pose, out)


# ---------------------------------------------------------------- .dfi format

def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_inventory(inv: Inventory) -> str:
    q = inv.pose.quat
    t = inv.pose.translation
    lines = [f"DFI 1 {inv.scene_id}",
             "POSE " + " ".join(_fmt(v) for v in (*t, *q))]
    for tr in inv.trees:
        vals = (*tr.axis, *tr.center, tr.base_height, tr.dbh)
        lines.append(f"TREE {tr.id} " + " ".join(_fmt(v) for v in vals) + f" {int(tr.candidate)}")
    return "\n".join(lines) + "\n"


def parse_inventory(text: str, allow_empty: bool = False) -> Inventory:
    """Parse a .dfi document.

    Axes within 1e-6 of unit length are renormalized silently only when they are
    already unit within 1e-9; otherwise they are rejected.
    """
    header = None
    pose = None
    trees: List[TreeRecord] = []
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if header is None:
                if tag != "DFI" or len(parts) != 3 or parts[1] != "1":
                    raise ParseError(lineno, "expected header 'DFI 1 <scene_id>'")
                header = int(parts[2])
            elif tag == "POSE":
                if pose is not None or len(parts) != 8:
                    raise ParseError(lineno, "expected one 'POSE tx ty tz qw qx qy qz' line")
                v = [float(p) for p in parts[1:]]
                try:
                    pose = RigidTransform.from_quat(v[:3], v[3:])
                except ValueError as exc:
                    raise ParseError(lineno, str(exc)) from None
            elif tag == "TREE":
                if pose is None:
                    raise ParseError(lineno, "TREE before POSE")
                if len(parts) != 10 or parts[9] not in ("0", "1"):
                    raise ParseError(lineno, "expected 'TREE id ax ay az cx cy base_h dbh 0|1'")
                v = [float(p) for p in parts[2:9]]
                norm = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
                if abs(norm - 1.0) > 1e-6:
                    raise InventoryError(f"line {lineno}: axis not unit length (|a| = {norm!r})")
                axis = tuple(v[:3])
                if abs(norm - 1.0) > 1e-9:
                    axis = tuple(c / norm for c in axis)
                trees.append(TreeRecord(int(parts[1]), axis, v[3:5], v[5], v[6], parts[9] == "1"))
            else:
                raise ParseError(lineno, f"unknown record {tag!r}")
        except ParseError:
            raise
        except InventoryError as exc:
            raise InventoryError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ParseError(lineno, f"malformed number ({exc})") from None
    if header is None:
        raise ParseError(1, "missing header")
    if pose is None:
        raise ParseError(2, "missing POSE line")
    if not trees and not allow_empty:
        raise InventoryError("inventory has no trees")
    return Inventory(header, pose, trees)


def global_from_inventory(inv: Inventory) -> GlobalInventory:
    """World-frame global inventory from a scene (applies the scene pose)."""
    trees = inv.trees if inv.pose == RigidTransform.identity() else transform_trees(inv.trees, inv.pose)
    return GlobalInventory(trees)


def inventory_from_global(g: GlobalInventory, scene_id: int = 0) -> Inventory:
    return Inventory(scene_id, RigidTransform.identity(), g.trees)


def quantize_tree(t: TreeRecord, resolution: float = 1e-3, axis_resolution: float = 1e-5) -> TreeRecord:
    """Round a tree to storage precision.

    Positions and DBH are snapped to ``resolution``; the axis keeps its x/y
    components on an ``axis_resolution`` grid and recomputes z so the vector
    stays unit length.
    """
    def snap(v, r):
        return round(round(v / r) * r, 10)

    ax, ay = snap(t.axis[0], axis_resolution), snap(t.axis[1], axis_resolution)
    h2 = ax * ax + ay * ay
    if h2 > 1.0:
        s = 1.0 / math.sqrt(h2)
        ax, ay, h2 = ax * s, ay * s, 1.0
    az = math.copysign(math.sqrt(1.0 - h2), t.axis[2])
    dbh = max(snap(t.dbh, resolution), resolution)
    return TreeRecord(t.id, (ax, ay, az), (snap(t.center[0], resolution), snap(t.center[1], resolution)),
                      snap(t.base_height, resolution), dbh, t.candidate)
