"""Geometric verification: planar alignment, IRLS, tree correspondences and 6-DoF recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .alignment import AxisAlignment
from .config import PoseConfig
from .geometry import RigidTransform, rot_2d, rot_x, rot_y


class DegenerateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlanarTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.array(self.rotation, dtype=float).reshape(2, 2))
        object.__setattr__(self, "translation", np.array(self.translation, dtype=float).reshape(2))

    @classmethod
    def identity(cls) -> "PlanarTransform":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, theta: float, t) -> "PlanarTransform":
        return cls(rot_2d(theta), t)

    @property
    def angle(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, float) @ self.rotation.T + self.translation

    def lift(self) -> RigidTransform:
        R = np.eye(3)
        R[:2, :2] = self.rotation
        return RigidTransform(R, [self.translation[0], self.translation[1], 0.0])


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    transform: RigidTransform
    overlap: float
    matches: List[Tuple[int, int]]
    planar_displacement: float
    planar: Optional[PlanarTransform] = None
    inlier_triangles: int = 0
    flags: Tuple[str, ...] = ()


def _pair_arrays(pairs) -> Tuple[np.ndarray, np.ndarray]:
    """Accept either ``(src_array, dst_array)`` or a sequence of ``(src_pt, dst_pt)`` pairs."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray) and pairs[0].ndim == 2:
        return np.asarray(pairs[0], float), np.asarray(pairs[1], float)
    src = np.array([np.asarray(p[0], float) for p in pairs]).reshape(-1, 2)
    dst = np.array([np.asarray(p[1], float) for p in pairs]).reshape(-1, 2)
    return src, dst


def weighted_align_2d(src: np.ndarray, dst: np.ndarray, w: Optional[np.ndarray] = None) -> PlanarTransform:
    """Closed-form weighted rigid 2D fit ``dst ~ R src + t`` (proper rotation only)."""
    src = np.asarray(src, float).reshape(-1, 2)
    dst = np.asarray(dst, float).reshape(-1, 2)
    if w is None:
        W = float(len(src))
        ms = src.sum(axis=0) / W
        md = dst.sum(axis=0) / W
        M = src.T @ dst
    else:
        w = np.asarray(w, float)
        W = float(w.sum())
        ms = (w @ src) / W
        md = (w @ dst) / W
        M = (src.T * w) @ dst
    # centered cross-covariance without forming centered copies
    M = M - W * np.outer(ms, md)
    s = M[0, 1] - M[1, 0]
    c = M[0, 0] + M[1, 1]
    R = rot_2d(math.atan2(s, c))
    return PlanarTransform(R, md - R @ ms)


def align_2d_groups(src: np.ndarray, dst: np.ndarray, w: np.ndarray, label: np.ndarray, n_groups: int
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted rigid 2D fits for several independent point sets at once.

    Returns per-group ``(angle, translation, weight mass)``; groups without
    weight get NaN parameters.
    """
    def gsum(v):
        return np.bincount(label, weights=v, minlength=n_groups)

    sx, sy, dx, dy = src[:, 0], src[:, 1], dst[:, 0], dst[:, 1]
    W = gsum(w)
    with np.errstate(invalid="ignore", divide="ignore"):
        ms = np.column_stack([gsum(w * sx), gsum(w * sy)]) / W[:, None]
        md = np.column_stack([gsum(w * dx), gsum(w * dy)]) / W[:, None]
    m00 = gsum(w * sx * dx) - W * ms[:, 0] * md[:, 0]
    m01 = gsum(w * sx * dy) - W * ms[:, 0] * md[:, 1]
    m10 = gsum(w * sy * dx) - W * ms[:, 1] * md[:, 0]
    m11 = gsum(w * sy * dy) - W * ms[:, 1] * md[:, 1]
    theta = np.arctan2(m01 - m10, m00 + m11)
    c, s = np.cos(theta), np.sin(theta)
    t = md - np.column_stack([c * ms[:, 0] - s * ms[:, 1], s * ms[:, 0] + c * ms[:, 1]])
    return theta, t, W


def irls_groups(src: np.ndarray, dst: np.ndarray, label: np.ndarray, theta0: np.ndarray, t0: np.ndarray,
                delta: float, iters: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Huber IRLS run independently per group, same rules as :func:`irls_refine`.

    Returns ``(angle, translation, warning)``; warned groups keep their start.
    """
    n = len(theta0)
    theta, t = theta0.copy(), t0.copy()
    warn = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    count = np.bincount(label, minlength=n)
    for _ in range(iters):
        if not active.any():
            break
        m = active[label]
        s, d, lab = src[m], dst[m], label[m]
        c, sn = np.cos(theta)[lab], np.sin(theta)[lab]
        rx = d[:, 0] - (c * s[:, 0] - sn * s[:, 1] + t[lab, 0])
        ry = d[:, 1] - (sn * s[:, 0] + c * s[:, 1] + t[lab, 1])
        r = np.sqrt(rx * rx + ry * ry)
        w = np.minimum(1.0, delta / np.maximum(r, 1e-300))
        th_new, t_new, W = align_2d_groups(s, d, w, lab, n)
        low = active & ((W < 2.0) | (count < 2))
        theta[low], t[low] = theta0[low], t0[low]
        warn |= low
        active &= ~low
        step = np.hypot(t_new[:, 0] - t[:, 0], t_new[:, 1] - t[:, 1])
        theta[active], t[active] = th_new[active], t_new[active]
        active &= ~(step < 1e-6)
    return theta, t, warn


def planar_align_svd(centroid_pairs) -> PlanarTransform:
    """Least-squares rigid 2D alignment of ``(query, candidate)`` point pairs."""
    src, dst = _pair_arrays(centroid_pairs)
    if len(src) < 2:
        raise DegenerateError("at least two point pairs are required")
    if np.all(np.abs(src - src[0]) < 1e-12):
        raise DegenerateError("query points are coincident")
    return weighted_align_2d(src, dst)


def huber_objective(res: np.ndarray, delta: float) -> float:
    r = np.abs(res)
    return float(np.sum(np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))))


def irls_refine(vertex_pairs, init: PlanarTransform, cfg: PoseConfig = PoseConfig(),
                return_info: bool = False):
    """Huber-weighted IRLS on point pairs, started from ``init``.

    With ``return_info`` the per-iteration Huber objective and a warning flag
    are returned alongside the transform.
    """
    src, dst = _pair_arrays(vertex_pairs)
    T = init
    history: List[float] = []
    warning = None
    delta = cfg.huber_delta
    for _ in range(cfg.irls_iters):
        d = dst - T.apply(src)
        r = np.sqrt(np.einsum("ij,ij->i", d, d))
        if return_info:
            history.append(huber_objective(r, delta))
        w = np.minimum(1.0, delta / np.maximum(r, 1e-300))
        if w.sum() < 2.0 or len(src) < 2:
            warning = "low_weight_mass"
            T = init
            break
        T_new = weighted_align_2d(src, dst, w)
        step = math.hypot(*(T_new.translation - T.translation))
        T = T_new
        if step < 1e-6:
            break
    if return_info:
        if warning is None:
            history.append(huber_objective(np.linalg.norm(dst - T.apply(src), axis=1), delta))
        return T, {"objective": history, "warning": warning}
    return T


def huber_step(src: np.ndarray, dst: np.ndarray, T: PlanarTransform, delta: float) -> PlanarTransform:
    """One Huber-weighted closed-form solve around ``T``."""
    r = np.linalg.norm(dst - T.apply(src), axis=1)
    w = np.minimum(1.0, delta / np.maximum(r, 1e-300))
    if len(src) < 2 or w.sum() < 2.0:
        return T
    return weighted_align_2d(src, dst, w)


def correspond(q_xy: np.ndarray, q_dbh: np.ndarray, c_xy: np.ndarray, c_dbh: np.ndarray,
               T: PlanarTransform, cfg: PoseConfig = PoseConfig()) -> Tuple[np.ndarray, np.ndarray]:
    """Greedy one-to-one nearest matches under the distance and DBH gates (row indices)."""
    if len(q_xy) == 0 or len(c_xy) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    moved = T.apply(q_xy)
    d = moved[:, None, :] - c_xy[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    ok = (dist < cfg.tau_d) & (np.abs(q_dbh[:, None] - c_dbh[None, :]) < cfg.tau_dbh)
    qi, ci = np.nonzero(ok)
    if len(qi) == 0:
        return qi, ci
    order = np.lexsort((ci, qi, dist[qi, ci]))
    used_q, used_c = set(), set()
    out_q, out_c = [], []
    for i, j in zip(qi[order].tolist(), ci[order].tolist()):
        if i in used_q or j in used_c:
            continue
        used_q.add(i)
        used_c.add(j)
        out_q.append(i)
        out_c.append(j)
    out_q = np.array(out_q, dtype=np.int64)
    out_c = np.array(out_c, dtype=np.int64)
    o = np.argsort(out_q, kind="stable")
    return out_q[o], out_c[o]


def tree_correspondences(query_proj, cand_proj, t: PlanarTransform, cfg: PoseConfig = PoseConfig()
                         ) -> List[Tuple[int, int]]:
    """``query_proj``/``cand_proj`` hold ``(id, xy, dbh)`` triples; returns matched id pairs."""
    if not query_proj or not cand_proj:
        return []
    qxy = np.array([p[1] for p in query_proj], float)
    cxy = np.array([p[1] for p in cand_proj], float)
    qd = np.array([p[2] for p in query_proj], float)
    cd = np.array([p[2] for p in cand_proj], float)
    qi, ci = correspond(qxy, qd, cxy, cd, t, cfg)
    return [(query_proj[i][0], cand_proj[j][0]) for i, j in zip(qi.tolist(), ci.tolist())]


# ------------------------------------------------------------------ roll / pitch

def _rodrigues_batch(axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    k = axes
    K = np.zeros((len(k), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -k[:, 2], k[:, 1]
    K[:, 1, 0], K[:, 1, 2] = k[:, 2], -k[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -k[:, 1], k[:, 0]
    s = np.sin(angles)[:, None, None]
    c = (1.0 - np.cos(angles))[:, None, None]
    return np.eye(3)[None] + s * K + c * (K @ K)


def swing_rotation(omega: Sequence[float]) -> np.ndarray:
    """Rotation by ``|omega|`` about the horizontal axis ``(wx, wy, 0)``."""
    wx, wy = float(omega[0]), float(omega[1])
    th = math.hypot(wx, wy)
    if th < 1e-300:
        return np.eye(3)
    return _rodrigues_batch(np.array([[wx / th, wy / th, 0.0]]), np.array([th]))[0]


def swing_between(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Horizontal-axis rotation vectors ``(k, 2)`` carrying each ``u`` onto ``w``."""
    d = w - u
    n = np.column_stack([-d[:, 1], d[:, 0], np.zeros(len(d))])
    nn = np.linalg.norm(n, axis=1)
    out = np.zeros((len(u), 2))
    ok = nn > 1e-12
    n = n[ok] / nn[ok, None]
    uu, ww = u[ok], w[ok]
    up = uu - np.sum(uu * n, axis=1, keepdims=True) * n
    wp = ww - np.sum(ww * n, axis=1, keepdims=True) * n
    ang = np.arctan2(np.sum(n * np.cross(up, wp), axis=1), np.sum(up * wp, axis=1))
    out[ok] = n[:, :2] * ang[:, None]
    return out


def _swing_batch(oms: np.ndarray) -> np.ndarray:
    th = np.hypot(oms[:, 0], oms[:, 1])
    axes = np.zeros((len(oms), 3))
    nz = th > 1e-300
    axes[nz, :2] = oms[nz] / th[nz, None]
    axes[~nz, 0] = 1.0
    return _rodrigues_batch(axes, th)


def _refit_swing(omega: np.ndarray, u: np.ndarray, w: np.ndarray, iters: int = 10) -> np.ndarray:
    """Gauss-Newton on ``sum |w - R(omega) u|^2`` (equivalently ``sum 1 - w.R u``).

    The Jacobian is a central difference; each iteration evaluates the trial
    point and its four stencil points in one batch.
    """
    h = 1e-7
    stencil = np.array([[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])

    def evaluate(om):
        Rs = _swing_batch(om + stencil)
        res = (w[None] - np.einsum("kij,nj->kni", Rs, u)).reshape(5, -1)
        J = np.column_stack([(res[1] - res[2]) / (2 * h), (res[3] - res[4]) / (2 * h)])
        return res[0], J

    omega = np.asarray(omega, float).copy()
    r, J = evaluate(omega)
    f = r @ r
    for _ in range(iters):
        JTJ = J.T @ J
        if np.linalg.det(JTJ) < 1e-20:
            break
        step = -np.linalg.solve(JTJ, J.T @ r)
        cand = omega + step
        rc, Jc = evaluate(cand)
        fc = rc @ rc
        if fc > f:
            break
        omega, r, J, f = cand, rc, Jc, fc
        # a nano-radian step is below the finite-difference Jacobian's resolution
        if np.hypot(*step) < 1e-9:
            break
    return omega


def rollpitch_ransac(axis_pairs, yaw_rotation: np.ndarray, cfg: PoseConfig = PoseConfig(),
                     return_info: bool = False):
    """Zero-twist rotation aligning yawed query axes to candidate axes, robust to axis outliers.

    Each single axis pair fixes a hypothesis; all pairs are tried when there are
    at most ``ransac_iters`` of them, otherwise a seeded sample is drawn.
    """
    if isinstance(axis_pairs, tuple) and len(axis_pairs) == 2 and isinstance(axis_pairs[0], np.ndarray):
        aq, ac = axis_pairs
    else:
        aq = np.array([p[0] for p in axis_pairs], float).reshape(-1, 3)
        ac = np.array([p[1] for p in axis_pairs], float).reshape(-1, 3)
    n = len(aq)
    info = {"confident": False, "inliers": 0}
    if n == 0:
        return (np.eye(3), info) if return_info else np.eye(3)
    u = aq @ np.asarray(yaw_rotation, float).T
    w = ac
    if n <= cfg.ransac_iters:
        sample = np.arange(n)
    else:
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        sample = rng.integers(0, n, size=cfg.ransac_iters)
    om = swing_between(u[sample], w[sample])
    th = np.hypot(om[:, 0], om[:, 1])
    axes = np.zeros((len(om), 3))
    nz = th > 0
    axes[nz, :2] = om[nz] / th[nz, None]
    axes[~nz, 0] = 1.0
    Rs = _rodrigues_batch(axes, th)
    cosang = np.einsum("nj,kij,ni->kn", u, Rs, w)
    inl = cosang > math.cos(cfg.ransac_inlier_angle)
    counts = inl.sum(axis=1)
    best = int(np.argmax(counts))
    if counts[best] < 2:
        return (np.eye(3), info) if return_info else np.eye(3)
    mask = inl[best]
    omega = _refit_swing(om[best], u[mask], w[mask])
    R = swing_rotation(omega)
    info = {"confident": True, "inliers": int(mask.sum())}
    return (R, info) if return_info else R


# ------------------------------------------------------------------ vertical

def _vertical_system(matches: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    b_hat, x_hat, y_hat, b_c = matches.T
    A = np.column_stack([np.ones(len(matches)), y_hat, -x_hat])
    return A, b_c - b_hat


def vertical_correct(matches, cfg: PoseConfig = PoseConfig(), return_info: bool = False):
    """Height offset and small roll/pitch ``(dz, dphi, dpsi)`` from matched base heights.

    ``matches`` rows are ``(b_hat_q, x_hat_q, y_hat_q, b_c)`` with query values
    already carried through the planar and roll-pitch alignment.
    """
    M = np.asarray(matches, float).reshape(-1, 4)
    n = len(M)
    info = {"confident": n >= 3, "inliers": n}
    if n == 0:
        info["confident"] = False
        out = (0.0, 0.0, 0.0)
        return (out, info) if return_info else out
    A, y = _vertical_system(M)
    if n < 3:
        out = (float(np.mean(y)), 0.0, 0.0)
        return (out, info) if return_info else out
    if n == 3:
        sol = np.linalg.lstsq(A, y, rcond=None)[0]
        out = tuple(float(v) for v in sol)
        return (out, info) if return_info else out
    n_comb = n * (n - 1) * (n - 2) // 6
    if n_comb <= cfg.ransac_iters:
        idx = np.array(list(combinations(range(n), 3)), dtype=np.int64)
    else:
        rng = np.random.Generator(np.random.Philox(cfg.seed + 1))
        idx = np.argsort(rng.random((cfg.ransac_iters, n)), axis=1)[:, :3]
    As = A[idx]
    ys = y[idx]
    det = np.linalg.det(As)
    good = np.abs(det) > 1e-9
    best_mask = None
    if good.any():
        sols = np.linalg.solve(As[good], ys[good][..., None])[..., 0]
        res = np.abs(A @ sols.T - y[:, None])
        inl = res < cfg.ransac_inlier_height
        counts = inl.sum(axis=0)
        best_mask = inl[:, int(np.argmax(counts))]
    if best_mask is None or best_mask.sum() < 3:
        sol = np.linalg.lstsq(A, y, rcond=None)[0]
        info["inliers"] = n
    else:
        sol = np.linalg.lstsq(A[best_mask], y[best_mask], rcond=None)[0]
        info["inliers"] = int(best_mask.sum())
    out = tuple(float(v) for v in sol)
    return (out, info) if return_info else out


def vertical_rotation(dphi: float, dpsi: float) -> np.ndarray:
    """Roll-then-pitch correction whose z row is ``(-cos(phi) sin(psi), sin(phi), cos(phi) cos(psi))``."""
    return rot_x(dphi) @ rot_y(dpsi)


def compose_final(t2d: PlanarTransform, r_rp: np.ndarray, dz_dphi_dpsi: Sequence[float],
                  align_q: AxisAlignment, align_c: AxisAlignment) -> RigidTransform:
    """Query-to-candidate transform in the original (unaligned) local frames."""
    dz, dphi, dpsi = (float(v) for v in dz_dphi_dpsi)
    corr = RigidTransform(vertical_rotation(dphi, dpsi) @ np.asarray(r_rp, float), [0.0, 0.0, dz])
    t6 = corr @ t2d.lift()
    return RigidTransform(align_c.rotation, np.zeros(3)).inverse() @ t6 @ RigidTransform(align_q.rotation, np.zeros(3))


def overlap_score(n_matches: int, n_q: int, n_c: int, planar_t, sigma_t: float = 10.0,
                  use_penalty: bool = True) -> float:
    if n_q < 1 or n_c < 1:
        raise ValueError("scene tree counts must be >= 1")
    if n_matches > min(n_q, n_c):
        raise ValueError("more matches than trees")
    jac = n_matches / (n_q + n_c - n_matches)
    if not use_penalty:
        return float(jac)
    t = np.asarray(planar_t, float)
    return float(jac * math.exp(-float(t @ t) / (sigma_t * sigma_t)))
