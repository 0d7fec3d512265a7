"""Stem-axis roll/pitch alignment and projection onto the horizontal plane."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .geometry import minimal_rotation
from .inventory import TreeRecord

E_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class AxisAlignment:
    rotation: np.ndarray
    reference: np.ndarray = E_Z
    residual: float = 0.0
    degenerate: bool = False

    @classmethod
    def identity(cls, reference=E_Z) -> "AxisAlignment":
        return cls(np.eye(3), np.asarray(reference, dtype=float), 0.0, False)

    def basis(self) -> np.ndarray:
        """2x3 matrix whose rows span the plane orthogonal to the reference."""
        v = self.reference
        if v[0] == 0.0 and v[1] == 0.0 and v[2] > 0:
            return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        helper = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u1 = np.cross(helper, v)
        u1 /= np.linalg.norm(u1)
        u2 = np.cross(v, u1)
        return np.vstack([u1, u2])


def alignment_objective(R: np.ndarray, axes: np.ndarray, reference=E_Z) -> float:
    c = np.abs(axes @ (R.T @ np.asarray(reference, float)))
    return float(np.sum((1.0 - c) ** 2))


def _direction_objective(d: np.ndarray, axes: np.ndarray) -> float:
    return float(np.sum((1.0 - np.abs(axes @ d)) ** 2))


def _refine_direction(d: np.ndarray, axes: np.ndarray, iters: int = 60) -> np.ndarray:
    """Newton on the unit sphere for sum (1 - |d . a|)^2, with step halving.

    The residuals stay nonzero at the optimum when stems lean, so the
    Gauss-Newton matrix alone converges slowly; the curvature of the sphere
    adds sum r |c| to its diagonal, which keeps it positive definite.
    """
    f = _direction_objective(d, axes)
    for _ in range(iters):
        helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        b1 = np.cross(d, helper)
        b1 /= np.linalg.norm(b1)
        b2 = np.cross(d, b1)
        c = axes @ d
        sgn = np.where(c >= 0, 1.0, -1.0)
        r = 1.0 - np.abs(c)
        J = -sgn[:, None] * np.column_stack([axes @ b1, axes @ b2])
        H = J.T @ J + float(r @ np.abs(c)) * np.eye(2)
        if np.linalg.det(H) < 1e-18:
            break
        step = -np.linalg.solve(H, J.T @ r)
        if np.hypot(*step) < 1e-9:
            return d
        for _ in range(30):
            cand = d + step[0] * b1 + step[1] * b2
            cand /= np.linalg.norm(cand)
            fc = _direction_objective(cand, axes)
            if fc < f:
                break
            step = step / 2
        else:
            return d
        gained = f - fc
        d, f = cand, fc
        if gained <= 1e-12 * f:
            break
    return d


def estimate_axis_alignment(axes: Sequence[Sequence[float]], reference: Sequence[float] = E_Z) -> AxisAlignment:
    """Rotation with zero twist about ``reference`` that makes the stem axes vertical.

    The dominant eigenvector of the axis scatter matrix gives the common stem
    direction (sign taken from the summed axes, falling back to the reference
    side); it is polished against the absolute-cosine objective and then carried
    onto ``reference`` by the minimal rotation.
    """
    A = np.asarray(axes, dtype=float).reshape(-1, 3)
    v = np.asarray(reference, dtype=float)
    if len(A) == 0:
        raise ValueError("at least one axis is required")
    w, V = np.linalg.eigh(A.T @ A)
    if w[2] - w[1] < 1e-9:
        return AxisAlignment(np.eye(3), v, alignment_objective(np.eye(3), A, v), True)
    d = V[:, 2]
    s = float(np.sum(A @ d))
    tol = 1e-9 * len(A)
    if s < -tol or (abs(s) <= tol and d @ v < 0):
        d = -d
    d = _refine_direction(d, A)
    R = minimal_rotation(d, v)
    return AxisAlignment(R, v, alignment_objective(R, A, v), False)


def project_positions(positions: np.ndarray, align: AxisAlignment) -> np.ndarray:
    """Rotate 3D stem positions into the aligned frame and drop the reference component."""
    P = np.asarray(positions, dtype=float).reshape(-1, 3) @ align.rotation.T
    return P @ align.basis().T


def project_to_plane(trees: Sequence[TreeRecord], align: AxisAlignment) -> List[Tuple[int, np.ndarray]]:
    if not trees:
        return []
    pos = np.array([[t.center[0], t.center[1], t.base_height] for t in trees])
    xy = project_positions(pos, align)
    return [(t.id, xy[i]) for i, t in enumerate(trees)]
