"""
Pinhole projection, frustum labels and 32x32 grid labels.

The vectorised helpers here are shared with the cost module so that a pose
which generated a set of labels re-evaluates to exactly zero cost.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DepthZero, GridConfigError, MalformedFile, NotInFrustum
from .liegroup import RigidTransform

GRID_CELL = 32
MIN_DEPTH = 1e-9
NO_GRID = -1

# body frame: x forward, y left, z up  ->  optical frame: x right, y down, z forward
OPTICAL_FROM_BODY = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


def camera_mount(height: float = 1.7) -> RigidTransform:
    """Optical-from-body transform for a forward-looking camera ``height`` m above the body origin."""
    return RigidTransform(OPTICAL_FROM_BODY, OPTICAL_FROM_BODY @ np.array([0.0, 0.0, -height]))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the body mount used by the planar (3-DoF) mode."""

    fx: float = 400.0
    fy: float = 400.0
    cx: float = 320.0
    cy: float = 192.0
    width: int = 640
    height: int = 384
    mount: RigidTransform = field(default_factory=camera_mount)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def check_grid(self):
        if self.width % GRID_CELL or self.height % GRID_CELL:
            raise GridConfigError(
                f"grid labels require width and height to be multiples of {GRID_CELL}, "
                f"got {self.width}x{self.height}"
            )

    @property
    def grid_shape(self):
        """(rows, cols) of the grid tessellation."""
        return self.height // GRID_CELL, self.width // GRID_CELL

    @property
    def num_cells(self) -> int:
        rows, cols = self.grid_shape
        return rows * cols

    def downsampled(self, factor: int = GRID_CELL) -> "CameraModel":
        return CameraModel(
            self.fx / factor, self.fy / factor, self.cx / factor, self.cy / factor,
            self.width // factor, self.height // factor, self.mount,
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height, "mount": self.mount.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        d = dict(d)
        mount = d.pop("mount", None)
        if mount is not None:
            d["mount"] = RigidTransform.from_list(mount)
        return cls(**d)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    intensity: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if pts.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=float).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError("intensity length does not match point count")
            inten.setflags(write=False)
            object.__setattr__(self, "intensity", inten)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, idx) -> "PointCloud":
        inten = None if self.intensity is None else self.intensity[idx]
        return PointCloud(self.points[idx], inten)

    def transformed(self, g: RigidTransform) -> "PointCloud":
        return PointCloud(g.apply(self.points), self.intensity)


@dataclass(frozen=True)
class Projection:
    pixel: tuple
    depth: float


@dataclass(frozen=True, eq=False)
class LabeledCloud:
    """Cloud with frustum labels and optional grid labels (``-1`` where absent)."""

    cloud: PointCloud
    frustum_labels: np.ndarray
    grid_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        lab = np.array(self.frustum_labels, dtype=np.uint8).reshape(-1)
        if lab.shape[0] != len(self.cloud):
            raise ValueError("label count does not match point count")
        if np.any(lab > 1):
            raise ValueError("frustum labels must be 0 or 1")
        lab.setflags(write=False)
        object.__setattr__(self, "frustum_labels", lab)
        if self.grid_labels is not None:
            grid = np.array(self.grid_labels, dtype=np.int64).reshape(-1)
            if grid.shape[0] != lab.shape[0]:
                raise ValueError("grid label count does not match point count")
            if np.any((grid >= 0) != (lab == 1)):
                raise ValueError("grid labels must be present exactly where the frustum label is 1")
            grid.setflags(write=False)
            object.__setattr__(self, "grid_labels", grid)

    def __len__(self):
        return len(self.cloud)

    @property
    def points(self) -> np.ndarray:
        return self.cloud.points

    @property
    def has_grid(self) -> bool:
        return self.grid_labels is not None

    def num_in_frustum(self) -> int:
        return int(self.frustum_labels.sum())


# ---------------------------------------------------------------------------
# vectorised kernels


def transform_points(R, t, P) -> np.ndarray:
    """``R p + t`` for the trailing 3-axis of ``P``, written elementwise.

    Avoids BLAS so each output element is rounded identically regardless of
    array size; label generation and cost evaluation stay bit-consistent.
    """
    x, y, z = P[..., 0], P[..., 1], P[..., 2]
    out = np.empty(np.broadcast_shapes(P.shape, np.shape(R)[:-2] + (1, 3)))
    for i in range(3):
        Ri = R[..., i, :]
        out[..., i] = (Ri[..., 0, None] * x + Ri[..., 1, None] * y) + (Ri[..., 2, None] * z + t[..., i, None])
    return out


def pixels_from_camera_points(pc, cam: CameraModel, depth=None):
    """Pixel coordinates ``(K P)/z``; ``depth`` overrides the divisor (e.g. clamped)."""
    z = pc[..., 2] if depth is None else depth
    px = cam.fx * pc[..., 0] / z + cam.cx
    py = cam.fy * pc[..., 1] / z + cam.cy
    return px, py


def in_frustum_mask(px, py, z, width, height) -> np.ndarray:
    """Inclusive image bounds ``0 <= p <= W-1`` and positive, non-negligible depth."""
    return (z >= MIN_DEPTH) & (px >= 0) & (px <= width - 1) & (py >= 0) & (py <= height - 1)


def frustum_labels_for(cam: CameraModel, g: RigidTransform, points) -> np.ndarray:
    pc = transform_points(g.rotation, g.translation, np.asarray(points, dtype=float))
    z = pc[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px, py = pixels_from_camera_points(pc, cam, np.where(z >= MIN_DEPTH, z, 1.0))
    return in_frustum_mask(px, py, z, cam.width, cam.height).astype(np.uint8)


def grid_cells_for_pixels(px, py, width) -> np.ndarray:
    cols = width // GRID_CELL
    return (np.floor(px / GRID_CELL) + np.floor(py / GRID_CELL) * cols).astype(np.int64)


# ---------------------------------------------------------------------------
# scalar operations


def transform_point(g: RigidTransform, p) -> np.ndarray:
    return g.apply(np.asarray(p, dtype=float).reshape(3))


def project(cam: CameraModel, p_cam) -> Projection:
    X, Y, Z = np.asarray(p_cam, dtype=float).reshape(3)
    if abs(Z) < 1e-12:
        raise DepthZero("point lies in the camera plane; pixel undefined")
    x = cam.fx * X + cam.cx * Z
    y = cam.fy * Y + cam.cy * Z
    return Projection((x / Z, y / Z), float(Z))


def frustum_label(cam: CameraModel, g: RigidTransform, p) -> int:
    return int(frustum_labels_for(cam, g, np.asarray(p, dtype=float).reshape(1, 3))[0])


def grid_label(cam: CameraModel, g: RigidTransform, p) -> int:
    cam.check_grid()
    p = np.asarray(p, dtype=float).reshape(1, 3)
    if not frustum_labels_for(cam, g, p)[0]:
        raise NotInFrustum("grid labels are defined only for in-frustum points")
    pc = transform_points(g.rotation, g.translation, p)
    px, py = pixels_from_camera_points(pc, cam)
    return int(grid_cells_for_pixels(px, py, cam.width)[0])


def label_cloud(cam: CameraModel, g: RigidTransform, cloud: PointCloud, with_grid: bool = False) -> LabeledCloud:
    if with_grid:
        cam.check_grid()
    labels = frustum_labels_for(cam, g, cloud.points)
    grid = None
    if with_grid:
        grid = np.full(len(cloud), NO_GRID, dtype=np.int64)
        inside = labels == 1
        pc = transform_points(g.rotation, g.translation, cloud.points[inside])
        px, py = pixels_from_camera_points(pc, cam)
        grid[inside] = grid_cells_for_pixels(px, py, cam.width)
    return LabeledCloud(cloud, labels, grid)


# ---------------------------------------------------------------------------
# columnar binary format

MAGIC = b"FRLC"
VERSION = 1
_HEADER = struct.Struct("<4sHHQ")
FLAG_GRID = 1
FLAG_INTENSITY = 2
_NO_GRID_U16 = 0xFFFF


def encode_labeled(labeled: LabeledCloud) -> bytes:
    n = len(labeled)
    flags = (FLAG_GRID if labeled.has_grid else 0) | (
        FLAG_INTENSITY if labeled.cloud.intensity is not None else 0
    )
    pts = labeled.points.astype("<f4")
    parts = [_HEADER.pack(MAGIC, VERSION, flags, n)]
    parts += [np.ascontiguousarray(pts[:, i]).tobytes() for i in range(3)]
    if flags & FLAG_INTENSITY:
        parts.append(labeled.cloud.intensity.astype("<f4").tobytes())
    parts.append(labeled.frustum_labels.astype(np.uint8).tobytes())
    if flags & FLAG_GRID:
        grid = np.where(labeled.grid_labels >= 0, labeled.grid_labels, _NO_GRID_U16)
        parts.append(grid.astype("<u2").tobytes())
    return b"".join(parts)


def decode_labeled(data: bytes) -> LabeledCloud:
    if len(data) < _HEADER.size:
        raise MalformedFile("file shorter than header")
    magic, version, flags, n = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise MalformedFile("not a labeled-cloud file (bad magic or version)")
    ncols = 3 + (1 if flags & FLAG_INTENSITY else 0)
    expected = _HEADER.size + n * (4 * ncols + 1 + (2 if flags & FLAG_GRID else 0))
    if len(data) != expected:
        raise MalformedFile(f"expected {expected} bytes, found {len(data)}")
    off = _HEADER.size
    cols = []
    for _ in range(ncols):
        cols.append(np.frombuffer(data, "<f4", n, off).astype(float))
        off += 4 * n
    labels = np.frombuffer(data, np.uint8, n, off)
    off += n
    grid = None
    if flags & FLAG_GRID:
        raw = np.frombuffer(data, "<u2", n, off).astype(np.int64)
        grid = np.where(raw == _NO_GRID_U16, NO_GRID, raw)
    intensity = cols[3] if flags & FLAG_INTENSITY else None
    try:
        cloud = PointCloud(np.stack(cols[:3], axis=1), intensity)
        return LabeledCloud(cloud, labels, grid)
    except ValueError as exc:
        raise MalformedFile(str(exc)) from exc


def save_labeled(labeled: LabeledCloud, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_labeled(labeled))


def load_labeled(path) -> LabeledCloud:
    with open(path, "rb") as fh:
        return decode_labeled(fh.read())
