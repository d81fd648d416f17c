import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pose, random_twist, series_exp
from frustreg.errors import NotPlanar, RotationNearPi
from frustreg.liegroup import (
    PlanarPose,
    RigidTransform,
    Twist,
    adjoint,
    as_vector,
    concat,
    exp_map,
    lift_planar,
    log_map,
    project_planar,
    rot_z,
    so3_exp,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)
small = st.floats(-0.28, 0.28, allow_nan=False)


def test_exp_zero_is_identity():
    g = exp_map(Twist.zero())
    assert np.array_equal(g.rotation, np.eye(3))
    assert np.array_equal(g.translation, np.zeros(3))


def test_exp_quarter_turn_about_z():
    g = exp_map([0, 0, 0, 0, 0, np.pi / 2])
    assert np.allclose(g.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    assert np.array_equal(g.translation, np.zeros(3))


def test_exp_matches_series():
    xi = [1, 2, 3, 0.1, 0.2, 0.3]
    assert np.max(np.abs(exp_map(xi).matrix() - series_exp(xi))) < 1e-9


def test_exp_matches_series_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        xi = random_twist(rng, max_angle=2.5)
        assert np.max(np.abs(exp_map(xi).matrix() - series_exp(xi.vector(), terms=60))) < 1e-9


def test_exp_small_angle_branch_is_continuous():
    for theta in (1e-12, 1e-9, 5e-9, 2e-8, 1e-6):
        xi = np.array([0.3, -0.2, 0.5, theta, -theta, theta]) / np.array([1, 1, 1, np.sqrt(3), np.sqrt(3), np.sqrt(3)])
        assert np.max(np.abs(exp_map(xi).matrix() - series_exp(xi))) < 1e-12


def test_pure_rotation_has_exactly_zero_translation():
    rng = np.random.default_rng(2)
    for _ in range(50):
        w = rng.normal(size=3)
        assert np.array_equal(exp_map(np.r_[0, 0, 0, w]).translation, np.zeros(3))


def test_log_identity_is_zero():
    assert np.array_equal(log_map(RigidTransform.identity()).vector(), np.zeros(6))


def test_log_exp_roundtrip_10k():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10_000):
        xi = random_twist(rng)
        worst = max(worst, np.max(np.abs(log_map(exp_map(xi)).vector() - xi.vector())))
    assert worst < 1e-9


def test_exp_log_roundtrip_on_poses():
    rng = np.random.default_rng(4)
    for _ in range(500):
        g = random_pose(rng)
        h = exp_map(log_map(g))
        assert np.linalg.norm(h.rotation - g.rotation) < 1e-9
        assert np.max(np.abs(h.translation - g.translation)) < 1e-9


@pytest.mark.parametrize("angle", [np.pi, np.pi - 1e-7, -np.pi])
def test_log_rejects_near_pi(angle):
    g = RigidTransform(rot_z(angle), np.zeros(3))
    with pytest.raises(RotationNearPi):
        log_map(g)


def test_log_accepts_just_below_threshold():
    log_map(RigidTransform(rot_z(np.pi - 1e-5), np.zeros(3)))


def test_concat_identity_and_inverse():
    rng = np.random.default_rng(5)
    for _ in range(100):
        xi = random_twist(rng, max_angle=2.0)
        assert np.max(np.abs(concat(Twist.zero(), xi).vector() - xi.vector())) < 1e-9
        inv = log_map(exp_map(xi).inverse())
        assert np.max(np.abs(concat(xi, inv).vector())) < 1e-9


def test_concat_matches_matrix_product():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        a, b = random_twist(rng, 1.0), random_twist(rng, 1.0)
        prod = series_exp(a.vector()) @ series_exp(b.vector())
        assert np.max(np.abs(exp_map(concat(a, b)).matrix() - prod)) < 1e-9


def test_concat_near_pi_raises():
    a = Twist(np.zeros(3), np.array([0, 0, np.pi / 2]))
    with pytest.raises(RotationNearPi):
        concat(a, a)


@settings(max_examples=200, deadline=None)
@given(st.lists(small, min_size=18, max_size=18), st.lists(finite, min_size=9, max_size=9))
def test_concat_associative(ws, ts):
    tw = [Twist(np.array(ts[3 * i:3 * i + 3]), np.array(ws[3 * i:3 * i + 3])) for i in range(3)]
    left = concat(concat(tw[0], tw[1]), tw[2]).vector()
    right = concat(tw[0], concat(tw[1], tw[2])).vector()
    assert np.max(np.abs(left - right)) < 1e-8


def test_rigid_transform_invariants_and_closure():
    rng = np.random.default_rng(7)
    for _ in range(100):
        g, h = random_pose(rng), random_pose(rng)
        for k in (g @ h, g.inverse(), h.inverse() @ g):
            assert np.linalg.norm(k.rotation.T @ k.rotation - np.eye(3)) < 1e-9
            assert abs(np.linalg.det(k.rotation) - 1) < 1e-9
        assert np.allclose((g @ g.inverse()).matrix(), np.eye(4), atol=1e-12)


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(2 * np.eye(3), np.zeros(3))


def test_twelve_number_serialisation():
    rng = np.random.default_rng(8)
    g = random_pose(rng)
    values = g.to_list()
    assert len(values) == 12
    assert values[3] == g.translation[0] and values[:3] == g.rotation[0].tolist()
    assert RigidTransform.from_list(values) == g
    with pytest.raises(ValueError):
        RigidTransform.from_list(values[:11])


def test_adjoint_transports_twists():
    rng = np.random.default_rng(9)
    for _ in range(50):
        g = random_pose(rng)
        xi = random_twist(rng, 0.5).vector()
        lhs = g.matrix() @ series_exp(xi) @ g.inverse().matrix()
        rhs = series_exp(adjoint(g) @ xi)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_planar_examples():
    assert lift_planar(PlanarPose(0, 0, 0)) == RigidTransform.identity()
    g = lift_planar(PlanarPose(np.pi / 2, 1, 2))
    assert np.allclose(g.rotation, so3_exp([0, 0, np.pi / 2]), atol=1e-15)
    assert np.array_equal(g.translation, [1.0, 2.0, 0.0])


def test_planar_roundtrip():
    rng = np.random.default_rng(10)
    for _ in range(100):
        p = PlanarPose(rng.uniform(-np.pi, np.pi), *rng.uniform(-20, 20, 2))
        q = project_planar(lift_planar(p))
        assert abs(q.yaw - p.yaw) < 1e-12 and abs(q.tx - p.tx) < 1e-12 and abs(q.ty - p.ty) < 1e-12
        g = lift_planar(p)
        assert g.translation[2] == 0.0 and np.array_equal(g.rotation[2], [0.0, 0.0, 1.0])


def test_project_planar_rejects_tilt_and_height():
    with pytest.raises(NotPlanar):
        project_planar(exp_map([0, 0, 0, 1e-3, 0, 0]))
    with pytest.raises(NotPlanar):
        project_planar(RigidTransform(np.eye(3), [0, 0, 1e-3]))


def test_as_vector_accepts_all_forms():
    v = np.arange(6.0)
    assert np.array_equal(as_vector(v), v)
    assert np.array_equal(as_vector(Twist.from_vector(v)), v)
    with pytest.raises(ValueError):
        as_vector(np.arange(5.0))
