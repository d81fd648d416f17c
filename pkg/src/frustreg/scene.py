"""
Synthetic scenes, the camera/cloud pair-sampling protocol, the label-noise
oracle that stands in for a learned classifier, and KITTI Velodyne I/O.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .camera import (
    MIN_DEPTH,
    NO_GRID,
    CameraModel,
    LabeledCloud,
    PointCloud,
    label_cloud,
    pixels_from_camera_points,
    transform_points,
)
from .errors import EmptyFrustum, MalformedFile
from .liegroup import PlanarPose, RigidTransform, lift_planar, rot_z

JITTER_SIGMA = 0.02
MAX_PAIR_ATTEMPTS = 100
MIN_VISIBLE_FRACTION = 0.01
BORDER_BAND = 32.0


@dataclass(frozen=True)
class SceneConfig:
    cloud_radius: float = 50.0
    num_points: int = 20480
    ground_fraction: float = 0.4
    facade_count: int = 12
    facade_height: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if not self.cloud_radius > 0:
            raise ValueError("cloud_radius must be positive")
        if self.num_points < 100:
            raise ValueError("num_points must be at least 100")
        if not 0.0 <= self.ground_fraction <= 1.0:
            raise ValueError("ground_fraction must lie in [0, 1]")
        if self.facade_count < 0 or (self.facade_count == 0 and self.ground_fraction < 1.0):
            raise ValueError("facade_count must be positive unless the scene is ground only")
        if not self.facade_height > 0:
            raise ValueError("facade_height must be positive")


@dataclass(frozen=True)
class PairProtocol:
    max_translation: float = 10.0
    planar_rotation: bool = True
    # translation of the random augmentation; zero keeps the camera within
    # max_translation of the cloud origin, which the solver's start disk assumes
    augment_translation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.max_translation > 0:
            raise ValueError("max_translation must be positive")
        if self.augment_translation < 0:
            raise ValueError("augment_translation must be non-negative")


@dataclass(frozen=True)
class NoiseModel:
    flip_rate: float = 0.0
    boundary_bias: float = 0.5
    grid_scatter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("flip_rate", "boundary_bias", "grid_scatter"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def config_to_dict(cfg) -> dict:
    return asdict(cfg)


def _truncated_normal(rng, sigma, size):
    return np.clip(rng.normal(0.0, sigma, size), -3 * sigma, 3 * sigma)


def _uniform_disk(rng, radius, size=None):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size))
    a = rng.uniform(0.0, 2 * np.pi, size)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)


def generate_scene(cfg: SceneConfig = SceneConfig()) -> PointCloud:
    """Ground disk plus vertical facade strips, z up, ground at z = 0.

    Coordinates are rounded to float32 so the cloud survives the binary
    formats unchanged.
    """
    rng = np.random.default_rng(cfg.seed)
    R = cfg.cloud_radius
    n_ground = int(round(cfg.ground_fraction * cfg.num_points))
    n_facade = cfg.num_points - n_ground

    ground = np.zeros((n_ground, 3))
    ground[:, :2] = _uniform_disk(rng, R, n_ground)
    ground[:, 2] = _truncated_normal(rng, JITTER_SIGMA, n_ground)

    parts = [ground]
    if n_facade:
        inner = R - 0.1  # leaves room for the normal jitter
        strips = []
        for _ in range(cfg.facade_count):
            c = _uniform_disk(rng, 0.85 * R)
            heading = rng.uniform(0.0, np.pi)
            d = np.array([math.cos(heading), math.sin(heading)])
            half = rng.uniform(4.0, 15.0)
            # clip the strip to the disk: |c + s d| <= inner
            b = float(c @ d)
            disc = math.sqrt(max(b * b - (c @ c - inner * inner), 0.0))
            lo, hi = max(-half, -b - disc), min(half, -b + disc)
            strips.append((c, d, lo, hi))
        lengths = np.array([hi - lo for _, _, lo, hi in strips])
        counts = rng.multinomial(n_facade, lengths / lengths.sum())
        for (c, d, lo, hi), n in zip(strips, counts):
            s = rng.uniform(lo, hi, n)
            normal = np.array([-d[1], d[0]])
            off = _truncated_normal(rng, JITTER_SIGMA, n)
            xy = c + s[:, None] * d + off[:, None] * normal
            z = rng.uniform(0.0, cfg.facade_height, n)
            parts.append(np.column_stack([xy, z]))
    pts = np.concatenate(parts, axis=0)
    pts = pts[rng.permutation(pts.shape[0])]
    return PointCloud(pts.astype(np.float32).astype(float))


def planar_camera_pose(cam: CameraModel, position, heading: float) -> RigidTransform:
    """Cloud-to-camera pose of a camera at ``position`` (x, y) looking along ``heading``."""
    yaw = -heading
    t = -rot_z(yaw) @ np.array([position[0], position[1], 0.0])
    return cam.mount @ lift_planar(PlanarPose(yaw, t[0], t[1]))


def sample_pair(
    cloud: PointCloud,
    cam: CameraModel,
    proto: PairProtocol = PairProtocol(),
    with_grid: bool = False,
    camera_pose: Optional[RigidTransform] = None,
    augment: Optional[RigidTransform] = None,
) -> Tuple[RigidTransform, LabeledCloud]:
    """Sample ``(G_gt, labels)`` with ``G_gt = G_pc * G_r^-1`` over the cloud moved by ``G_r``.

    ``camera_pose`` (``G_pc``) and ``augment`` (``G_r``) can be forced for tests.
    """
    rng = np.random.default_rng(proto.seed)
    for _ in range(MAX_PAIR_ATTEMPTS):
        if camera_pose is None:
            pos = _uniform_disk(rng, proto.max_translation)
            g_pc = planar_camera_pose(cam, pos, rng.uniform(0.0, 2 * np.pi))
        else:
            g_pc = camera_pose
        if augment is not None:
            g_r = augment
        elif proto.planar_rotation:
            shift = _uniform_disk(rng, proto.augment_translation) if proto.augment_translation > 0 else (0.0, 0.0)
            g_r = lift_planar(PlanarPose(rng.uniform(0.0, 2 * np.pi), shift[0], shift[1]))
        else:
            g_r = RigidTransform.identity()
        moved = g_r.apply(cloud.points).astype(np.float32).astype(float)
        moved_cloud = PointCloud(moved, cloud.intensity)
        g_gt = g_pc @ g_r.inverse()
        labeled = label_cloud(cam, g_gt, moved_cloud, with_grid=with_grid)
        if labeled.frustum_labels.mean() >= MIN_VISIBLE_FRACTION:
            return g_gt, labeled
        if camera_pose is not None and augment is not None:
            break
    raise EmptyFrustum(f"no sampled camera saw {MIN_VISIBLE_FRACTION:.0%} of the points")


def near_border_mask(cam: CameraModel, g: RigidTransform, points, band: float = BORDER_BAND) -> np.ndarray:
    """Points in front of the camera whose projection is within ``band`` px of the image border."""
    pc = transform_points(g.rotation, g.translation, np.asarray(points, dtype=float))
    z = pc[:, 2]
    front = z >= MIN_DEPTH
    with np.errstate(divide="ignore", invalid="ignore"):
        px, py = pixels_from_camera_points(pc, cam, np.where(front, z, 1.0))
    W1, H1 = cam.width - 1, cam.height - 1
    dx_out = np.maximum(np.maximum(-px, px - W1), 0.0)
    dy_out = np.maximum(np.maximum(-py, py - H1), 0.0)
    outside = np.hypot(dx_out, dy_out)
    inside = np.minimum(np.minimum(px, W1 - px), np.minimum(py, H1 - py))
    dist = np.where((dx_out > 0) | (dy_out > 0), outside, inside)
    return front & (dist <= band)


def corrupt_labels(
    labeled: LabeledCloud,
    noise: NoiseModel,
    cam: Optional[CameraModel] = None,
    g: Optional[RigidTransform] = None,
) -> LabeledCloud:
    """Emulate classifier error: flip frustum labels, scatter grid labels.

    The number of flips is Binomial(N, flip_rate); a ``boundary_bias`` share of
    them is drawn from points near the frustum border (needs ``cam`` and the
    true pose ``g``), the rest uniformly from the remaining points.
    """
    rng = np.random.default_rng(noise.seed)
    n = len(labeled)
    labels = labeled.frustum_labels.copy()
    n_flip = int(rng.binomial(n, noise.flip_rate)) if noise.flip_rate > 0 else 0
    flip = np.zeros(n, dtype=bool)
    if n_flip:
        n_border = int(round(noise.boundary_bias * n_flip))
        if n_border:
            if cam is None or g is None:
                raise ValueError("boundary-biased noise needs the camera and the true pose")
            border_idx = np.flatnonzero(near_border_mask(cam, g, labeled.points))
            n_border = min(n_border, border_idx.size)
            flip[rng.choice(border_idx, n_border, replace=False)] = True
        rest = np.flatnonzero(~flip)
        flip[rng.choice(rest, n_flip - n_border, replace=False)] = True
        labels[flip] ^= 1

    grid = None
    if labeled.has_grid:
        if cam is None:
            raise ValueError("grid label corruption needs the camera model")
        ncell = cam.num_cells
        grid = labeled.grid_labels.copy()
        grid[labels == 0] = NO_GRID
        fresh = (labels == 1) & (grid < 0)
        grid[fresh] = rng.integers(0, ncell, int(fresh.sum()))
        if noise.grid_scatter > 0:
            scatter = (labels == 1) & (rng.uniform(size=n) < noise.grid_scatter)
            grid[scatter] = rng.integers(0, ncell, int(scatter.sum()))
    return LabeledCloud(labeled.cloud, labels, grid)


def downsample(cloud: PointCloud, target: int, seed: int = 0) -> PointCloud:
    if target < 1:
        raise ValueError("target must be at least 1")
    n = len(cloud)
    if n <= target:
        return cloud
    idx = np.sort(np.random.default_rng(seed).choice(n, target, replace=False))
    return cloud.subset(idx)


# ---------------------------------------------------------------------------
# KITTI Velodyne .bin: records of four little-endian float32 (x, y, z, intensity)


def parse_kitti_bin(data: bytes) -> PointCloud:
    if len(data) == 0:
        raise MalformedFile("empty file: a cloud needs at least one point")
    if len(data) % 16:
        raise MalformedFile(f"file size {len(data)} is not a multiple of 16 bytes")
    rec = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    if not np.all(np.isfinite(rec)):
        raise MalformedFile("file contains non-finite values")
    rec = rec.astype(float)
    return PointCloud(rec[:, :3], rec[:, 3])


def encode_kitti_bin(cloud: PointCloud) -> bytes:
    inten = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    return np.column_stack([cloud.points, inten]).astype("<f4").tobytes()


def load_kitti_bin(path) -> PointCloud:
    return parse_kitti_bin(Path(path).read_bytes())


def save_kitti_bin(cloud: PointCloud, path) -> None:
    Path(path).write_bytes(encode_kitti_bin(cloud))
