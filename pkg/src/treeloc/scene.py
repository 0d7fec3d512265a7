"""Per-scene precomputation shared by database build and queries."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .alignment import AxisAlignment, estimate_axis_alignment
from .config import PipelineConfig
from .descriptors import compute_pdh, compute_tdh
from .geometry import RigidTransform
from .inventory import Inventory
from .triangles import hash_counts, triangle_arrays


@dataclass(eq=False)
class SceneModel:
    """Aligned geometry, descriptors and triangle arrays for one inventory.

    ``xyz`` holds stem positions in the axis-aligned frame (its first two
    columns are the projected centers); ``tri_*`` arrays index rows of the
    tree arrays.
    """

    scene_id: int
    pose: RigidTransform
    ids: np.ndarray
    axes: np.ndarray
    dbh: np.ndarray
    alignment: AxisAlignment
    xyz: np.ndarray
    aligned_axes: np.ndarray
    tdh: np.ndarray
    pdh: np.ndarray
    tri_verts: np.ndarray
    tri_hash: np.ndarray
    tri_centroid: np.ndarray
    inventory: Optional[Inventory] = None
    _hash_order: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.ids)

    @property
    def xy(self) -> np.ndarray:
        return self.xyz[:, :2]

    @property
    def descriptorless(self) -> bool:
        return self.n_trees < 3

    @property
    def tri_dbh(self) -> np.ndarray:
        return self.dbh[self.tri_verts]

    @property
    def hash_order(self) -> np.ndarray:
        if self._hash_order is None:
            self._hash_order = np.argsort(self.tri_hash, kind="stable")
        return self._hash_order

    def hash_multiset(self):
        return hash_counts(self.tri_hash)


def prepare_scene(inv: Inventory, cfg: PipelineConfig, tri_arrays: Optional[dict] = None,
                  descriptors: Optional[tuple] = None) -> SceneModel:
    a = inv.arrays
    n = len(inv)
    pos = np.column_stack([a["centers"], a["base"]])
    if n:
        align = estimate_axis_alignment(a["axes"])
    else:
        align = AxisAlignment.identity()
    xyz = pos @ align.rotation.T
    aligned_axes = a["axes"] @ align.rotation.T
    if descriptors is not None:
        tdh, pdh = descriptors
    elif n >= 3:
        tdh = compute_tdh(xyz[:, :2], a["dbh"], cfg.coarse).bins
        pdh = compute_pdh(xyz[:, :2], cfg.coarse).bins
    else:
        tdh = pdh = np.zeros(40)
    if tri_arrays is None:
        tri_arrays = triangle_arrays(xyz[:, :2], a["ids"], cfg.hash)
    verts = tri_arrays["verts"]
    centroid = tri_arrays.get("centroid")
    if centroid is None:
        centroid = xyz[:, :2][verts].mean(axis=1) if len(verts) else np.zeros((0, 2))
    return SceneModel(
        scene_id=inv.scene_id, pose=inv.pose, ids=a["ids"], axes=a["axes"], dbh=a["dbh"],
        alignment=align, xyz=xyz, aligned_axes=aligned_axes, tdh=tdh, pdh=pdh,
        tri_verts=verts, tri_hash=tri_arrays["hash"], tri_centroid=centroid, inventory=inv,
    )
