"""
Multi-start Levenberg-Marquardt minimisation of the inverse-projection cost.

The unknown is the cloud-to-camera pose ``G``. Updates are left-multiplicative,
``G <- exp(delta) G``, which is the twist concatenation ``delta o xi`` carried
out in the group so that poses with large rotations never pass through a log.

In planar mode the perturbation is restricted to x/y translation and yaw of the
camera's body frame (z up), mapped into the camera frame through the adjoint of
the camera mount.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .camera import CameraModel, LabeledCloud
from .cost import CostConfig, Evaluation, analytic_jacobian, as_pose, evaluate_pose, fd_jacobian_compact
from .errors import AllStartsFailed, NoInFrustumPoints, SingularNormalEquations
from .liegroup import RigidTransform, adjoint, exp_map
from .scene import planar_camera_pose

MAX_DAMPING = 1e8


class Mode(str, Enum):
    SIX_DOF = "6dof"
    PLANAR = "3dof"


@dataclass(frozen=True)
class SolverConfig:
    mode: Mode = Mode.PLANAR
    num_starts: int = 60
    max_iters: int = 100
    cost_tolerance: float = 1e-6
    step_tolerance: float = 1e-8
    damping_init: float = 1e-4
    damping_factor: float = 10.0
    translation_init_radius: float = 10.0
    # steps that move the camera centre further than this from the cloud
    # origin are rejected; None disables the bound
    max_camera_distance: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.num_starts < 1:
            raise ValueError("num_starts must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        for name in ("cost_tolerance", "step_tolerance", "damping_init", "translation_init_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_camera_distance is not None and not self.max_camera_distance > 0:
            raise ValueError("max_camera_distance must be positive")
        if not self.damping_factor > 1:
            raise ValueError("damping_factor must exceed 1")


@dataclass
class StartRecord:
    index: int
    init_pose: RigidTransform
    final_pose: RigidTransform
    final_cost: float
    iterations: int
    reason: str
    cost_trace: List[float] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.reason == "singular"

    def to_dict(self, with_trace: bool = False) -> dict:
        d = {
            "index": self.index,
            "init_pose": self.init_pose.to_list(),
            "final_pose": self.final_pose.to_list(),
            "final_cost": self.final_cost,
            "iterations": self.iterations,
            "reason": self.reason,
        }
        if with_trace:
            d["cost_trace"] = list(self.cost_trace)
        return d


@dataclass
class SolveReport:
    best_pose: RigidTransform
    best_cost: float
    best_index: int
    starts: List[StartRecord]
    wall_time: float

    def prefix(self, k: int) -> "SolveReport":
        """Report restricted to the first ``k`` starts (identical to a ``k``-start run)."""
        return _reduce(self.starts[:k], self.wall_time)

    def to_dict(self, verbose: bool = False) -> dict:
        d = {
            "best_pose": self.best_pose.to_list(),
            "best_cost": self.best_cost,
            "best_index": self.best_index,
            "wall_time": self.wall_time,
            "num_starts": len(self.starts),
            "num_failed": sum(s.failed for s in self.starts),
        }
        if verbose:
            d["starts"] = [s.to_dict(with_trace=True) for s in self.starts]
        return d


def planar_basis(cam: CameraModel) -> np.ndarray:
    """Camera-frame twist directions for body-frame x, y translation and yaw."""
    return adjoint(cam.mount)[:, [0, 1, 5]]


def _basis(cam: CameraModel, mode: Mode) -> np.ndarray:
    return planar_basis(cam) if Mode(mode) is Mode.PLANAR else np.eye(6)


def _jacobian(ev: Evaluation, label1, cam, cost_cfg: CostConfig, basis):
    """``(J_rows, r_rows)`` restricted to rows that can be nonzero."""
    if cost_cfg.jacobian == "analytic":
        return analytic_jacobian(ev, label1, cam, cost_cfg, basis), ev.residuals
    idx, Jc = fd_jacobian_compact(ev, label1, cam, cost_cfg, basis)
    return Jc, ev.residuals[idx]


def _solve_normal(J: np.ndarray, r: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(JtJ + lam diag(JtJ) + 1e-12 I) delta = -Jt r``.

    The ridge is far below roundoff once ``|J|`` is large, so the system is
    solved in the eigenbasis of the damped matrix. ``Jt r`` lies in the range
    of ``Jt``, so directions that are null to working precision carry no
    exact component and are dropped instead of amplifying roundoff by 1e12.
    """
    JtJ = J.T @ J
    g = J.T @ r
    if not np.any(JtJ) and np.any(r):
        raise SingularNormalEquations("no residual responds to the pose (all rows inactive)")
    M = JtJ + lam * np.diag(np.diag(JtJ))
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalEquations(str(exc)) from exc
    keep = w > max(w[-1], 0.0) * M.shape[0] * np.finfo(float).eps
    delta = V[:, keep] @ ((V[:, keep].T @ -g) / (w[keep] + 1e-12))
    if not np.all(np.isfinite(delta)):
        raise SingularNormalEquations("normal equations produced a non-finite step")
    return delta


def gauss_newton_step(
    pose,
    labeled: LabeledCloud,
    cam: CameraModel,
    cost_cfg: CostConfig = CostConfig(),
    lam: float = 0.0,
    mode: Mode = Mode.SIX_DOF,
):
    """One damped Gauss-Newton step. Returns ``(delta, new_cost)``.

    ``delta`` holds coefficients along the mode's basis (6 for 6-DoF; x, y,
    yaw of the body frame for planar mode); the candidate pose is
    ``exp(basis @ delta) * pose``.
    """
    if labeled.num_in_frustum() < 1:
        raise NoInFrustumPoints("need at least one point labeled in-frustum")
    pose = as_pose(pose)
    label1 = labeled.frustum_labels == 1
    basis = _basis(cam, mode)
    ev = evaluate_pose(labeled.points, label1, pose, cam, cost_cfg)
    if ev.cost == 0.0:
        return np.zeros(basis.shape[1]), 0.0
    J, r = _jacobian(ev, label1, cam, cost_cfg, basis)
    delta = _solve_normal(J, r, lam)
    cand = exp_map(basis @ delta) @ pose
    return delta, evaluate_pose(labeled.points, label1, cand, cam, cost_cfg).cost


def optimize_from(
    init: RigidTransform,
    labeled: LabeledCloud,
    cam: CameraModel,
    cost_cfg: CostConfig = CostConfig(),
    solver_cfg: SolverConfig = SolverConfig(),
    index: int = 0,
) -> StartRecord:
    """Levenberg-Marquardt from one initial pose; a singular system ends the start as failed."""
    label1 = labeled.frustum_labels == 1
    points = labeled.points
    basis = _basis(cam, solver_cfg.mode)
    ev = evaluate_pose(points, label1, init, cam, cost_cfg)
    trace = [ev.cost]
    lam = solver_cfg.damping_init
    bound = solver_cfg.max_camera_distance
    J = None
    reason = "max_iters"
    it = 0
    for it in range(solver_cfg.max_iters + 1):
        if ev.cost <= solver_cfg.cost_tolerance:
            reason = "cost"
            break
        if it == solver_cfg.max_iters:
            break
        if J is None:
            J, r = _jacobian(ev, label1, cam, cost_cfg, basis)
        try:
            delta = _solve_normal(J, r, lam)
        except SingularNormalEquations:
            reason = "singular"
            break
        step = basis @ delta
        if np.linalg.norm(step) <= solver_cfg.step_tolerance:
            reason = "step"
            break
        cand_pose = exp_map(step) @ ev.pose
        if bound is not None and np.linalg.norm(cand_pose.center()) > bound:
            cand = None
        else:
            cand = evaluate_pose(points, label1, cand_pose, cam, cost_cfg)
        if cand is not None and cand.cost < ev.cost:
            ev = cand
            J = None
            trace.append(ev.cost)
            lam /= solver_cfg.damping_factor
        else:
            lam *= solver_cfg.damping_factor
            if lam > MAX_DAMPING:
                reason = "damping"
                break
    return StartRecord(index, init, ev.pose, ev.cost, it, reason, trace)


def yaw_init(labeled: LabeledCloud, cam: CameraModel, position) -> float:
    """Planar yaw that points the camera at the horizontal centroid of in-frustum points.

    ``position`` is the candidate camera position (x, y) in the cloud frame.
    The bearing is atan2 of the mean horizontal offset of label-1 points, so
    the centroid lands on the principal axis. The returned value is the yaw of
    the body-from-cloud rotation, i.e. minus the camera heading: points along
    +x give 0, points along +y give -pi/2.
    """
    label1 = labeled.frustum_labels == 1
    if not np.any(label1):
        raise NoInFrustumPoints("yaw initialisation needs at least one in-frustum point")
    mean = labeled.points[label1, :2].mean(axis=0) - np.asarray(position, dtype=float)[:2]
    if not np.any(mean):
        return 0.0
    return -math.atan2(mean[1], mean[0])


def start_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, index])


def initial_pose(labeled: LabeledCloud, cam: CameraModel, cfg: SolverConfig, index: int) -> RigidTransform:
    """Start ``index``: camera position uniform in the init disk; heading from
    :func:`yaw_init` (planar) or uniform (6-DoF, roll/pitch zero)."""
    rng = start_rng(cfg.seed, index)
    r = cfg.translation_init_radius * math.sqrt(rng.uniform())
    a = rng.uniform(0.0, 2 * math.pi)
    pos = np.array([r * math.cos(a), r * math.sin(a)])
    if Mode(cfg.mode) is Mode.PLANAR:
        heading = -yaw_init(labeled, cam, pos)
    else:
        heading = rng.uniform(0.0, 2 * math.pi)
    return planar_camera_pose(cam, pos, heading)


def _reduce(starts: Sequence[StartRecord], wall_time: float) -> SolveReport:
    ok = [s for s in starts if not s.failed]
    if not ok:
        raise AllStartsFailed(
            f"all {len(starts)} starts failed", [f"start {s.index}: {s.reason}" for s in starts]
        )
    best = min(ok, key=lambda s: (s.final_cost, s.index))
    return SolveReport(best.final_pose, best.final_cost, best.index, list(starts), wall_time)


def solve(
    labeled: LabeledCloud,
    cam: CameraModel,
    cost_cfg: CostConfig = CostConfig(),
    solver_cfg: SolverConfig = SolverConfig(),
    inits: Optional[Sequence[RigidTransform]] = None,
    workers: int = 1,
) -> SolveReport:
    """Run every start and keep the lowest final cost (ties -> lowest index).

    ``inits`` overrides the random starts (e.g. a PnP estimate).
    """
    if labeled.num_in_frustum() < 1:
        raise NoInFrustumPoints("need at least one point labeled in-frustum")
    t0 = time.perf_counter()
    if inits is None:
        inits = [initial_pose(labeled, cam, solver_cfg, i) for i in range(solver_cfg.num_starts)]

    def run(i):
        return optimize_from(inits[i], labeled, cam, cost_cfg, solver_cfg, index=i)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            starts = list(ex.map(run, range(len(inits))))
    else:
        starts = [run(i) for i in range(len(inits))]
    return _reduce(starts, time.perf_counter() - t0)


def solver_config_dict(cfg: SolverConfig) -> dict:
    d = asdict(cfg)
    d["mode"] = Mode(cfg.mode).value
    return d
