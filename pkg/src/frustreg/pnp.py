"""
Grid-classification baseline: grid labels become 2D-3D correspondences on the
1/32-scale image, and the pose comes from RANSAC around EPnP.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .camera import GRID_CELL, CameraModel, LabeledCloud
from .errors import DegenerateConfiguration, NoConsensus, NoGridLabels
from .liegroup import RigidTransform

PLANAR_RATIO = 1e-10
# fixed extra starting directions for the four-vector beta search
BETA_SEEDS = np.random.default_rng(0).normal(size=(16, 4))


@dataclass(frozen=True)
class Correspondence:
    point: np.ndarray
    pixel: np.ndarray


@dataclass(frozen=True)
class Correspondences:
    """Column-stored correspondence set; ``points`` (M, 3), ``pixels`` (M, 2)."""

    points: np.ndarray
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        q = np.asarray(self.pixels, dtype=float).reshape(-1, 2)
        if p.shape[0] != q.shape[0]:
            raise ValueError("points and pixels differ in length")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "pixels", q)

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, i) -> Correspondence:
        return Correspondence(self.points[i], self.pixels[i])

    def subset(self, idx) -> "Correspondences":
        return Correspondences(self.points[idx], self.pixels[idx])


@dataclass(frozen=True)
class PnpConfig:
    inlier_threshold: float = 0.6
    max_iterations: int = 500
    min_inliers: int = 6
    seed: int = 0

    def __post_init__(self):
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.min_inliers < 4:
            raise ValueError("min_inliers must be at least 4")


def grid_to_correspondences(
    labeled: LabeledCloud, cam: CameraModel, center: bool = False
) -> Tuple[Correspondences, CameraModel]:
    """Cell coordinates of every label-1 point plus the 1/32-scale camera.

    ``center`` adds half a cell to each coordinate; by default the cell's
    corner index is used as is.
    """
    if not labeled.has_grid:
        raise NoGridLabels("labeled cloud carries no grid labels")
    down = cam.downsampled(GRID_CELL)
    sel = labeled.frustum_labels == 1
    cells = labeled.grid_labels[sel]
    py = cells // down.width
    px = cells - down.width * py
    pix = np.column_stack([px, py]).astype(float)
    if center:
        pix += 0.5
    return Correspondences(labeled.points[sel], pix), down


def save_correspondences_csv(corr: Correspondences, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "p_x", "p_y"])
        for p, q in zip(corr.points, corr.pixels):
            w.writerow([repr(float(v)) for v in (*p, *q)])


# ---------------------------------------------------------------------------
# EPnP


def _control_points(P: np.ndarray):
    c0 = P.mean(axis=0)
    A = P - c0
    evals, evecs = np.linalg.eigh(A.T @ A / P.shape[0])
    evals, evecs = evals[::-1], evecs[:, ::-1]
    if evals[0] <= 0:
        raise DegenerateConfiguration("all 3D points coincide")
    planar = evals[2] <= PLANAR_RATIO * evals[0]
    if planar and evals[1] <= PLANAR_RATIO * evals[0]:
        raise DegenerateConfiguration("3D points are collinear")
    k = 2 if planar else 3
    ctrl = [c0] + [c0 + np.sqrt(evals[i]) * evecs[:, i] for i in range(k)]
    return np.array(ctrl)


def _barycentric(P: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
    B = (ctrl[1:] - ctrl[0]).T  # 3 x k
    coef = np.linalg.lstsq(B, (P - ctrl[0]).T, rcond=None)[0].T
    return np.column_stack([1.0 - coef.sum(axis=1), coef])


def _build_m(alphas, pixels, K):
    fx, fy, cx, cy = K[0, 0], K[1, 1], K[0, 2], K[1, 2]
    n, nc = alphas.shape
    M = np.zeros((2 * n, 3 * nc))
    u, v = pixels[:, 0], pixels[:, 1]
    for j in range(nc):
        a = alphas[:, j]
        M[0::2, 3 * j] = a * fx
        M[0::2, 3 * j + 2] = a * (cx - u)
        M[1::2, 3 * j + 1] = a * fy
        M[1::2, 3 * j + 2] = a * (cy - v)
    return M


def _kabsch(Pw: np.ndarray, Pc: np.ndarray) -> RigidTransform:
    cw, cc = Pw.mean(axis=0), Pc.mean(axis=0)
    U, _, Vt = np.linalg.svd((Pc - cc).T @ (Pw - cw))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    R = U @ D @ Vt
    return RigidTransform(R, cc - R @ cw)


def reprojection_errors(g: RigidTransform, corr: Correspondences, cam: CameraModel) -> np.ndarray:
    """Euclidean pixel error per correspondence; points at or behind the camera get inf."""
    pc = g.apply(corr.points)
    z = pc[:, 2]
    out = np.full(len(corr), np.inf)
    front = z > 0
    u = cam.fx * pc[front, 0] / z[front] + cam.cx
    v = cam.fy * pc[front, 1] / z[front] + cam.cy
    out[front] = np.hypot(u - corr.pixels[front, 0], v - corr.pixels[front, 1])
    return out


def _betas_gauss_newton(dv, dw, betas, iters=10):
    """Gauss-Newton on the control-point distance equations for a batch of starts.

    dv: (pairs, K, 3) null-vector differences; dw: (pairs,) squared world
    distances; betas: (S, K). Returns the polished betas and their squared
    distance residuals.
    """
    for _ in range(iters):
        d = np.einsum("pkc,sk->spc", dv, betas)
        f = np.einsum("spc,spc->sp", d, d) - dw
        J = 2.0 * np.einsum("spc,pkc->spk", d, dv)
        step = -np.einsum("skp,sp->sk", np.linalg.pinv(J), f)
        betas = betas + step
        if np.all(np.linalg.norm(step, axis=1) <= 1e-12 * (1.0 + np.linalg.norm(betas, axis=1))):
            break
    d = np.einsum("pkc,sk->spc", dv, betas)
    f = np.einsum("spc,spc->sp", d, d) - dw
    return betas, np.einsum("sp,sp->s", f, f)


def _initial_betas(dv, dw, K):
    """Linearised solve for the products beta_a beta_b (full when enough pairs)."""
    pairs = list(itertools.combinations_with_replacement(range(K), 2))
    if K == 1:
        a = np.linalg.norm(dv[:, 0], axis=1)
        return np.array([np.sqrt(dw) @ a / (a @ a)])
    if len(pairs) > dv.shape[0]:
        return None
    L = np.column_stack(
        [(1.0 if a == b else 2.0) * np.einsum("pc,pc->p", dv[:, a], dv[:, b]) for a, b in pairs]
    )
    prod = np.linalg.lstsq(L, dw, rcond=None)[0]
    sq = np.array([prod[pairs.index((a, a))] for a in range(K)])
    beta = np.sqrt(np.abs(sq))
    # signs relative to the dominant component
    lead = int(np.argmax(beta))
    for a in range(K):
        if a != lead:
            key = (min(a, lead), max(a, lead))
            if prod[pairs.index(key)] < 0:
                beta[a] = -beta[a]
    return beta


def _epnp_core(corr: Correspondences, cam: CameraModel) -> RigidTransform:
    if len(corr) < 4:
        raise DegenerateConfiguration(f"EPnP needs at least 4 correspondences, got {len(corr)}")
    Pw = corr.points
    ctrl = _control_points(Pw)
    nc = ctrl.shape[0]
    alphas = _barycentric(Pw, ctrl)
    M = _build_m(alphas, corr.pixels, cam.K)
    # right singular vectors only; the full U would be (2n, 2n)
    _, s, Vt = np.linalg.svd(M, full_matrices=M.shape[0] < M.shape[1])
    if s.size and s[0] == 0:
        raise DegenerateConfiguration("control-point system is identically zero")
    pair_idx = list(itertools.combinations(range(nc), 2))
    dw = np.array([np.sum((ctrl[a] - ctrl[b]) ** 2) for a, b in pair_idx])

    best, best_err = None, np.inf
    found = []
    for K in range(1, min(4, nc) + 1):
        V = Vt[-K:][::-1].T.reshape(nc, 3, K)  # control point, coord, null vector
        dv = np.stack([(V[a] - V[b]).T for a, b in pair_idx])  # pairs, K, 3
        beta = _initial_betas(dv, dw, K)
        if beta is not None:
            seeds = beta[None]
        else:
            # too few pairs to linearise: polish the lower-dimensional solutions
            # and a fixed set of directions scaled to the world distances
            dirs = BETA_SEEDS[:, :K]
            a = np.einsum("spc,spc->sp", *(2 * [np.einsum("pkc,sk->spc", dv, dirs)]))
            scaled = dirs * np.sqrt(a @ dw / np.einsum("sp,sp->s", a, a))[:, None]
            seeds = np.vstack([np.append(b, np.zeros(K - b.size)) for b in found] + [scaled])
        betas, resid = _betas_gauss_newton(dv, dw, seeds)
        beta = betas[int(np.argmin(resid))]
        found.append(beta)
        Pc = alphas @ np.einsum("jck,k->jc", V, beta)
        if np.mean(Pc[:, 2]) < 0:
            Pc = -Pc
        g = _kabsch(Pw, Pc)
        err = np.mean(reprojection_errors(g, corr, cam))
        if best is None or err < best_err:
            best, best_err = (g, beta), err
    if best is None or not np.all(np.isfinite(best[0].matrix())):
        raise DegenerateConfiguration("rank-deficient control-point system")
    return best[0]


def refine_pose(g: RigidTransform, corr: Correspondences, cam: CameraModel) -> RigidTransform:
    """LM over reprojection error, parameterised by rotation vector and translation."""
    x0 = np.concatenate([Rotation.from_matrix(g.rotation).as_rotvec(), g.translation])
    K = cam.K

    def fun(x):
        pc = Rotation.from_rotvec(x[:3]).apply(corr.points) + x[3:]
        z = pc[:, 2]
        u = K[0, 0] * pc[:, 0] / z + K[0, 2]
        v = K[1, 1] * pc[:, 1] / z + K[1, 2]
        return np.concatenate([u - corr.pixels[:, 0], v - corr.pixels[:, 1]])

    if np.any(g.apply(corr.points)[:, 2] <= 0):
        return g
    res = least_squares(fun, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    if not np.all(np.isfinite(res.x)) or res.cost > 0.5 * np.sum(fun(x0) ** 2):
        return g
    return RigidTransform(Rotation.from_rotvec(res.x[:3]).as_matrix(), res.x[3:])


def epnp(corr: Correspondences, cam: CameraModel, refine: bool = True) -> RigidTransform:
    """EPnP (four control points, or three for planar scenes) with optional LM polish."""
    g = _epnp_core(corr, cam)
    return refine_pose(g, corr, cam) if refine else g


def ransac_pnp(
    corr: Correspondences, cam: CameraModel, cfg: PnpConfig = PnpConfig()
) -> Tuple[RigidTransform, np.ndarray]:
    """Fixed-count RANSAC over minimal 4-point EPnP hypotheses.

    The winning hypothesis maximises the inlier count (ties: lowest index);
    EPnP plus LM is then refit on its consensus set and the returned mask is
    recomputed at the refit pose.
    """
    n = len(corr)
    if n < 4:
        raise DegenerateConfiguration(f"RANSAC needs at least 4 correspondences, got {n}")
    rng = np.random.default_rng(cfg.seed)
    samples = [rng.choice(n, 4, replace=False) for _ in range(cfg.max_iterations)]
    best_count, best_mask = -1, None
    for idx in samples:
        try:
            g = _epnp_core(corr.subset(idx), cam)
        except DegenerateConfiguration:
            continue
        mask = reprojection_errors(g, corr, cam) < cfg.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask = count, mask
    if best_mask is None or best_count < cfg.min_inliers:
        raise NoConsensus(f"best hypothesis has {max(best_count, 0)} inliers, need {cfg.min_inliers}")
    try:
        g = epnp(corr.subset(best_mask), cam)
    except DegenerateConfiguration as exc:
        raise NoConsensus(f"consensus set is degenerate: {exc}") from exc
    mask = reprojection_errors(g, corr, cam) < cfg.inlier_threshold
    if mask.sum() < cfg.min_inliers:
        raise NoConsensus(f"refit pose keeps {int(mask.sum())} inliers, need {cfg.min_inliers}")
    return g, mask


def pnp_from_labels(
    labeled: LabeledCloud, cam: CameraModel, cfg: PnpConfig = PnpConfig(), center: bool = False
) -> Tuple[RigidTransform, np.ndarray, Correspondences]:
    corr, down = grid_to_correspondences(labeled, cam, center=center)
    g, mask = ransac_pnp(corr, down, cfg)
    return g, mask, corr
