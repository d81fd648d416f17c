"""
Relaxed inverse-projection residuals and their Jacobians.

For a point with label 1 the residual measures how far its projection lies
outside the image (plus a penalty for negative depth); for a point with
label 0 it measures how far inside the frustum it lies. The label-0 indicator
reuses the exact frustum test that generates labels, so a pose that produced
a label set evaluates to exactly zero cost on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from . import _kernels
from .camera import (
    MIN_DEPTH,
    CameraModel,
    LabeledCloud,
    in_frustum_mask,
    pixels_from_camera_points,
    transform_points,
)
from .liegroup import RigidTransform, Twist, exp_map

# label-1 pixels divide by max(|z|, BEHIND_CLAMP): behind the camera they mirror
# through the optical centre, so border terms stay bounded and the depth term dominates
BEHIND_CLAMP = 1e-6

PoseLike = Union[RigidTransform, Twist, np.ndarray]


@dataclass(frozen=True)
class CostConfig:
    alpha: float = 50.0
    fd_step: float = 1e-6
    depth_floor: float = BEHIND_CLAMP
    jacobian: str = "fd"  # "fd" | "analytic"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 1e-9 < self.fd_step < 1e-3:
            raise ValueError("fd_step must lie in (1e-9, 1e-3)")
        if not self.depth_floor > 0:
            raise ValueError("depth_floor must be positive")
        if self.jacobian not in ("fd", "analytic"):
            raise ValueError("jacobian must be 'fd' or 'analytic'")


class ResidualVector(NamedTuple):
    values: np.ndarray
    total_cost: float


def as_pose(x: PoseLike) -> RigidTransform:
    if isinstance(x, RigidTransform):
        return x
    return exp_map(x)


# ---------------------------------------------------------------------------
# scalar building blocks (ufunc-friendly)


def border_cost_in(coord, extent):
    """Zero inside ``[0, extent]``, distance to the nearest border outside."""
    return np.maximum(-coord, 0.0) + np.maximum(coord - extent, 0.0)


def behind_cost(depth, alpha):
    return alpha * np.maximum(-depth, 0.0)


def border_cost_out(coord, extent):
    """Positive inside ``(0, extent)``, negative outside; peaks at the centre."""
    return extent / 2.0 - np.abs(coord - extent / 2.0)


# ---------------------------------------------------------------------------
# vectorised core


def residual_core(pc, label1, cam: CameraModel, alpha: float, depth_floor: float = BEHIND_CLAMP):
    """Residuals for camera-frame points ``pc`` (``(..., N, 3)``).

    Returns ``(r, px, py)`` where the pixels are those the residual was
    evaluated at.
    """
    Z = pc[..., 2]
    zdiv = np.where(label1, np.maximum(np.abs(Z), depth_floor), np.where(Z >= MIN_DEPTH, Z, 1.0))
    px, py = pixels_from_camera_points(pc, cam, zdiv)
    W, H = float(cam.width), float(cam.height)
    r1 = (border_cost_in(px, W) + border_cost_in(py, H)) + behind_cost(Z, alpha)
    gate = in_frustum_mask(px, py, Z, cam.width, cam.height)
    r0 = np.where(gate, border_cost_out(px, W) + border_cost_out(py, H), 0.0)
    return np.where(label1, r1, r0), px, py


class Evaluation(NamedTuple):
    pose: RigidTransform
    pc: np.ndarray
    residuals: np.ndarray
    px: np.ndarray
    py: np.ndarray
    cost: float


def _cam_args(cam: CameraModel):
    return float(cam.fx), float(cam.fy), float(cam.cx), float(cam.cy), float(cam.width), float(cam.height)


def evaluate_pose(points, label1, pose: RigidTransform, cam: CameraModel, cfg: CostConfig) -> Evaluation:
    """Transform, project and score every point at ``pose`` (compiled path)."""
    P = np.ascontiguousarray(points, dtype=float)
    n = P.shape[0]
    pc = np.empty((n, 3))
    px, py, r = np.empty(n), np.empty(n), np.empty(n)
    _kernels.evaluate(pose.rotation, pose.translation, P, np.asarray(label1, dtype=bool),
                      *_cam_args(cam), float(cfg.alpha), float(cfg.depth_floor), pc, px, py, r)
    return Evaluation(pose, pc, r, px, py, float(np.sum(r * r)))


def evaluate_pose_numpy(points, label1, pose: RigidTransform, cam: CameraModel, cfg: CostConfig) -> Evaluation:
    """Pure-numpy reference for :func:`evaluate_pose`; rounds identically."""
    pc = transform_points(pose.rotation, pose.translation, np.asarray(points, dtype=float))
    r, px, py = residual_core(pc, label1, cam, cfg.alpha, cfg.depth_floor)
    return Evaluation(pose, pc, r, px, py, float(np.sum(r * r)))


def residual(point, label: int, xi: PoseLike, cam: CameraModel, cfg: CostConfig = CostConfig()) -> float:
    ev = evaluate_pose(np.asarray(point, dtype=float).reshape(1, 3), np.array([label == 1]), as_pose(xi), cam, cfg)
    return float(ev.residuals[0])


def evaluate(labeled: LabeledCloud, xi: PoseLike, cam: CameraModel, cfg: CostConfig = CostConfig()) -> ResidualVector:
    ev = evaluate_pose(labeled.points, labeled.frustum_labels == 1, as_pose(xi), cam, cfg)
    return ResidualVector(ev.residuals, ev.cost)


# ---------------------------------------------------------------------------
# Jacobians


def _basis_exps(basis: np.ndarray, h: float):
    """Rotations/translations of ``exp(+h b_k)`` then ``exp(-h b_k)``."""
    k = basis.shape[1]
    Rs = np.empty((2 * k, 3, 3))
    ts = np.empty((2 * k, 3))
    for j in range(k):
        for s, sign in enumerate((1.0, -1.0)):
            g = exp_map(sign * h * basis[:, j])
            Rs[s * k + j] = g.rotation
            ts[s * k + j] = g.translation
    return Rs, ts


def _motion_coefficients(basis: np.ndarray):
    a = float(np.max(np.linalg.norm(basis[:3], axis=0)))
    b = float(np.max(np.linalg.norm(basis[3:], axis=0)))
    return a, b


def fd_rows_needed(ev: Evaluation, label1, cam: CameraModel, h: float, basis: np.ndarray,
                   cfg_floor: float = BEHIND_CLAMP) -> np.ndarray:
    """Rows whose central difference can be nonzero.

    A zero residual stays exactly zero under a perturbation of size ``h`` if
    its projection cannot reach a kink; point motion is bounded by
    ``h (|rho| + |omega| |p|)``. Everything else is flagged.
    """
    a, b = _motion_coefficients(basis)
    out = np.empty(ev.pc.shape[0], dtype=bool)
    _kernels.rows_needed(ev.pc, ev.px, ev.py, ev.residuals, np.asarray(label1, dtype=bool), a, b, float(h),
                         float(cam.fx), float(cam.fy), float(cam.width), float(cam.height), float(cfg_floor), out)
    return out


def fd_jacobian_compact(ev: Evaluation, label1, cam: CameraModel, cfg: CostConfig, basis: np.ndarray,
                        rows: Optional[np.ndarray] = None):
    """``(idx, J_rows)``: central differences for the rows that can be nonzero."""
    h = cfg.fd_step
    if rows is None:
        rows = fd_rows_needed(ev, label1, cam, h, basis, cfg.depth_floor)
    idx = np.flatnonzero(rows)
    Jc = np.empty((idx.size, basis.shape[1]))
    if idx.size:
        Rs, ts = _basis_exps(basis, h)
        _kernels.fd_rows(ev.pc, idx, np.asarray(label1, dtype=bool), Rs, ts, float(h),
                         *_cam_args(cam), float(cfg.alpha), float(cfg.depth_floor), Jc)
    return idx, Jc


def fd_jacobian(ev: Evaluation, label1, cam: CameraModel, cfg: CostConfig, basis: Optional[np.ndarray] = None,
                rows: Optional[np.ndarray] = None) -> np.ndarray:
    """Central differences of the residuals w.r.t. left perturbations ``exp(e) G``."""
    basis = np.eye(6) if basis is None else np.asarray(basis, dtype=float)
    idx, Jc = fd_jacobian_compact(ev, label1, cam, cfg, basis, rows)
    J = np.zeros((ev.pc.shape[0], basis.shape[1]))
    J[idx] = Jc
    return J


def fd_jacobian_numpy(ev: Evaluation, label1, cam: CameraModel, cfg: CostConfig,
                      basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Reference: central differences over every row, pure numpy."""
    basis = np.eye(6) if basis is None else np.asarray(basis, dtype=float)
    k = basis.shape[1]
    h = cfg.fd_step
    Rs, ts = _basis_exps(basis, h)
    r, _, _ = residual_core(transform_points(Rs, ts, ev.pc), label1, cam, cfg.alpha, cfg.depth_floor)
    return ((r[:k] - r[k:]) / (2.0 * h)).T


def analytic_jacobian(ev: Evaluation, label1, cam: CameraModel, cfg: CostConfig,
                      basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Chain-rule Jacobian, valid away from kinks of the piecewise-linear costs."""
    basis = np.eye(6) if basis is None else np.asarray(basis, dtype=float)
    pc, px, py = ev.pc, ev.px, ev.py
    X, Y, Z = pc[:, 0], pc[:, 1], pc[:, 2]
    W, H = float(cam.width), float(cam.height)
    n = pc.shape[0]

    clamped = label1 & (np.abs(Z) < cfg.depth_floor)
    zdiv = np.where(label1, np.maximum(np.abs(Z), cfg.depth_floor), np.where(Z >= MIN_DEPTH, Z, 1.0))
    zsign = np.where(Z < 0, -1.0, 1.0)
    dpx = np.zeros((n, 3))
    dpy = np.zeros((n, 3))
    dpx[:, 0] = cam.fx / zdiv
    dpy[:, 1] = cam.fy / zdiv
    dpx[:, 2] = np.where(clamped, 0.0, -zsign * cam.fx * X / zdiv**2)
    dpy[:, 2] = np.where(clamped, 0.0, -zsign * cam.fy * Y / zdiv**2)

    # label 1
    gx = np.where(px < 0, -1.0, 0.0) + np.where(px > W, 1.0, 0.0)
    gy = np.where(py < 0, -1.0, 0.0) + np.where(py > H, 1.0, 0.0)
    d1 = gx[:, None] * dpx + gy[:, None] * dpy
    d1[:, 2] += np.where(Z < 0, -cfg.alpha, 0.0)
    # label 0
    gate = in_frustum_mask(px, py, Z, cam.width, cam.height)
    ux = -np.sign(px - W / 2.0)
    uy = -np.sign(py - H / 2.0)
    d0 = np.where(gate[:, None], ux[:, None] * dpx + uy[:, None] * dpy, 0.0)

    dr_dpc = np.where(label1[:, None], d1, d0)
    # d(pc)/d(eps) = [I, -skew(pc)]
    out = np.empty((n, 6))
    out[:, :3] = dr_dpc
    out[:, 3:] = np.cross(pc, dr_dpc)
    return out @ basis


def jacobian(labeled: LabeledCloud, xi: PoseLike, cam: CameraModel, cfg: CostConfig = CostConfig(),
             basis: Optional[np.ndarray] = None) -> np.ndarray:
    """N x k Jacobian w.r.t. the left perturbation ``eps o xi`` along ``basis`` columns."""
    label1 = labeled.frustum_labels == 1
    ev = evaluate_pose(labeled.points, label1, as_pose(xi), cam, cfg)
    if cfg.jacobian == "analytic":
        return analytic_jacobian(ev, label1, cam, cfg, basis)
    return fd_jacobian(ev, label1, cam, cfg, basis)


def residual_table(labeled: LabeledCloud, xi: PoseLike, cam: CameraModel, cfg: CostConfig = CostConfig()):
    """Per-point rows ``(index, label, px, py, z, r)`` for debugging dumps."""
    label1 = labeled.frustum_labels == 1
    ev = evaluate_pose(labeled.points, label1, as_pose(xi), cam, cfg)
    return np.column_stack([
        np.arange(len(labeled)), labeled.frustum_labels, ev.px, ev.py, ev.pc[:, 2], ev.residuals,
    ])
