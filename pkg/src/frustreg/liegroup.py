"""
SE(3) / se(3) utilities.

Twists are ordered (rho, omega): translational part first, rotational part
(axis-angle, radians) second. All types are immutable; every function here is
pure.

Frame convention used throughout the package: a pose ``G`` maps points from
the point-cloud frame into the camera frame, ``p_cam = R @ p + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import NotPlanar, RotationNearPi

SMALL_ANGLE = 1e-8
NEAR_PI = 1e-6
SERIES_ANGLE = 0.1
ORTHO_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation + translation, ``x -> R x + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(self.rotation).reshape(3, 3)
        t = _frozen(self.translation).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("rigid transform has non-finite entries")
        if np.linalg.norm(R.T @ R - np.eye(3)) >= ORTHO_TOL or np.linalg.det(R) <= 0:
            raise ValueError("rotation is not orthonormal with determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "RigidTransform":
        """Parse 12 numbers, a row-major 3x4 ``[R | t]`` (KITTI pose layout)."""
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != 12:
            raise ValueError(f"expected 12 numbers, got {values.size}")
        return cls.from_matrix(values.reshape(3, 4))

    def to_list(self) -> list:
        return np.hstack([self.rotation, self.translation[:, None]]).reshape(-1).tolist()

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self * other``: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other):
        if isinstance(other, RigidTransform):
            return self.compose(other)
        return NotImplemented

    def apply(self, points) -> np.ndarray:
        """Transform a single 3-vector or an ``(N, 3)`` array."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def center(self) -> np.ndarray:
        """Origin of this transform's target frame expressed in its source frame."""
        return -self.rotation.T @ self.translation

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        return f"RigidTransform({self.to_list()})"


@dataclass(frozen=True, eq=False)
class Twist:
    """Element of se(3): ``rho`` (metres) and ``omega`` (axis-angle, radians)."""

    rho: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen(self.rho).reshape(3))
        object.__setattr__(self, "omega", _frozen(self.omega).reshape(3))

    @classmethod
    def from_vector(cls, v) -> "Twist":
        v = np.asarray(v, dtype=float).reshape(6)
        return cls(v[:3], v[3:])

    @classmethod
    def zero(cls) -> "Twist":
        return cls()

    def vector(self) -> np.ndarray:
        return np.concatenate([self.rho, self.omega])

    def __eq__(self, other):
        if not isinstance(other, Twist):
            return NotImplemented
        return bool(np.array_equal(self.vector(), other.vector()))

    def __hash__(self):
        return hash(self.vector().tobytes())

    def __repr__(self):
        return f"Twist(rho={self.rho.tolist()}, omega={self.omega.tolist()})"


TwistLike = Union[Twist, Sequence[float], np.ndarray]


def as_vector(xi: TwistLike) -> np.ndarray:
    if isinstance(xi, Twist):
        return xi.vector()
    return np.asarray(xi, dtype=float).reshape(6)


@dataclass(frozen=True)
class PlanarPose:
    """3-DoF pose: rotation ``yaw`` about +z and translation ``(tx, ty, 0)``."""

    yaw: float = 0.0
    tx: float = 0.0
    ty: float = 0.0


def skew(v) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def _coefficients(theta: float):
    """``sin(t)/t``, ``(1-cos t)/t^2``, ``(t - sin t)/t^3``."""
    t2 = theta * theta
    if theta < SMALL_ANGLE:
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    h = math.sin(0.5 * theta)
    A = math.sin(theta) / theta
    B = 2.0 * h * h / t2
    if theta < SERIES_ANGLE:
        # the closed form of C cancels catastrophically here
        C = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2**3 / 362880.0 + t2**4 / 39916800.0
    else:
        C = (theta - math.sin(theta)) / (theta * t2)
    return A, B, C


def _vinv_coefficient(theta: float) -> float:
    """``(1 - A / (2 B)) / t^2``, the W^2 weight of the inverse V-matrix."""
    t2 = theta * theta
    if theta < SMALL_ANGLE:
        return 1.0 / 12.0 + t2 / 720.0
    if theta < SERIES_ANGLE:
        return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2**3 / 1209600.0 + t2**4 / 47900160.0
    A, B, _ = _coefficients(theta)
    return (1.0 - A / (2.0 * B)) / t2


def so3_exp(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float).reshape(3)
    theta = float(np.linalg.norm(omega))
    A, B, _ = _coefficients(theta)
    W = skew(omega)
    return np.eye(3) + A * W + B * (W @ W)


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix, in radians, via atan2 (stable at 0)."""
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.linalg.norm(vee(R - R.T))
    c = 0.5 * (np.trace(R) - 1.0)
    return math.atan2(s, c)


def so3_log(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    v = 0.5 * vee(R - R.T)
    s = float(np.linalg.norm(v))
    c = 0.5 * (np.trace(R) - 1.0)
    theta = math.atan2(s, c)
    if theta > math.pi - NEAR_PI:
        raise RotationNearPi(f"rotation angle {theta:.9f} rad is within {NEAR_PI} of pi")
    if theta < SMALL_ANGLE:
        return (1.0 + theta * theta / 6.0) * v
    return (theta / s) * v


def exp_map(xi: TwistLike) -> RigidTransform:
    """Closed-form SE(3) exponential (Rodrigues rotation, V-matrix translation)."""
    v = as_vector(xi)
    rho, omega = v[:3], v[3:]
    theta = float(np.linalg.norm(omega))
    A, B, C = _coefficients(theta)
    W = skew(omega)
    W2 = W @ W
    R = np.eye(3) + A * W + B * W2
    V = np.eye(3) + B * W + C * W2
    return RigidTransform(R, V @ rho)


def log_map(g: RigidTransform) -> Twist:
    omega = so3_log(g.rotation)
    theta = float(np.linalg.norm(omega))
    W = skew(omega)
    k = _vinv_coefficient(theta)
    V_inv = np.eye(3) - 0.5 * W + k * (W @ W)
    return Twist(V_inv @ g.translation, omega)


def concat(xi_kj: TwistLike, xi_ji: TwistLike) -> Twist:
    """``log(exp(xi_kj) * exp(xi_ji))``."""
    return log_map(exp_map(xi_kj) @ exp_map(xi_ji))


def adjoint(g: RigidTransform) -> np.ndarray:
    """6x6 adjoint for (rho, omega) ordering: ``g exp(x) g^-1 = exp(Ad_g x)``."""
    R, t = g.rotation, g.translation
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = R
    Ad[:3, 3:] = skew(t) @ R
    Ad[3:, 3:] = R
    return Ad


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def lift_planar(p: PlanarPose) -> RigidTransform:
    return RigidTransform(rot_z(p.yaw), [p.tx, p.ty, 0.0])


def project_planar(g: RigidTransform, tol: float = 1e-6) -> PlanarPose:
    R, t = g.rotation, g.translation
    # roll/pitch show up as a tilted z column
    tilt = math.hypot(R[0, 2], R[1, 2])
    if tilt >= tol or abs(t[2]) >= tol:
        raise NotPlanar(f"pose is not planar (tilt={tilt:.3g}, t_z={t[2]:.3g})")
    return PlanarPose(math.atan2(R[1, 0], R[0, 0]), float(t[0]), float(t[1]))


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi
