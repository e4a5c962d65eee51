import math

import numpy as np
import pytest

from modalband.errors import DegenerateTimestepError, InvalidIncrementError, ParameterError
from modalband.manifold import (
    Pose,
    PoseIncrement,
    boxminus_pose,
    boxplus_pose,
    finite_diff,
    finite_diff_pose,
    interp_control,
    interp_pose,
    onesided_velocity,
    pose_delta,
    quat_from_yaw_pitch_roll,
    quat_mul,
)


def quat_exp_series(v, terms=30):
    """Brute-force quaternion exponential of the pure quaternion (0, v)."""
    q = np.array([1.0, 0.0, 0.0, 0.0])
    term = np.array([1.0, 0.0, 0.0, 0.0])
    p = np.array([0.0, v[0], v[1], v[2]])
    for k in range(1, terms):
        term = quat_mul(term, p) / k
        q = q + term
    return q


def random_pose(rng):
    q = rng.normal(size=4)
    return Pose(rng.normal(scale=5.0, size=3), q / np.linalg.norm(q))


# -- boxplus ------------------------------------------------------------------


def test_boxplus_zero_increment_is_identity():
    q = Pose.from_planar(1.0, 2.0, 0.3)
    out = boxplus_pose(q, PoseIncrement.zero())
    np.testing.assert_array_equal(out.position, q.position)
    np.testing.assert_allclose(out.orientation, q.orientation, atol=1e-15)


def test_boxplus_pure_translation():
    q = Pose.identity()
    out = boxplus_pose(q, PoseIncrement(np.array([1.0, 0.0, 0.0]), np.zeros(3)))
    np.testing.assert_allclose(out.position, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(out.orientation, [1.0, 0.0, 0.0, 0.0])


def test_boxplus_rotation_matches_series_exponential():
    # Increment (0, 0, pi/4) should produce the 90-degree rotation about z.
    v = np.array([0.0, 0.0, math.pi / 4.0])
    out = boxplus_pose(Pose.identity(), PoseIncrement(np.zeros(3), v))
    np.testing.assert_allclose(out.orientation, quat_exp_series(v), atol=1e-12)
    np.testing.assert_allclose(out.yaw, math.pi / 2.0, atol=1e-12)


def test_boxplus_random_rotations_match_series():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.normal(scale=0.8, size=3)
        out = boxplus_pose(Pose.identity(), PoseIncrement(np.zeros(3), v))
        np.testing.assert_allclose(out.orientation, quat_exp_series(v), atol=1e-12)


def test_boxplus_rejects_non_finite():
    with pytest.raises(InvalidIncrementError):
        boxplus_pose(Pose.identity(), PoseIncrement(np.array([np.nan, 0, 0]), np.zeros(3)))


def test_quaternion_norm_preserved_over_chained_increments():
    rng = np.random.default_rng(7)
    q = Pose.identity()
    increments = rng.normal(scale=1e-3, size=(100_000, 3))
    for v in increments:
        q = boxplus_pose(q, PoseIncrement(np.zeros(3), v))
    assert abs(np.linalg.norm(q.orientation) - 1.0) < 1e-9


# -- boxminus -----------------------------------------------------------------


def test_boxminus_of_equal_poses_is_zero():
    q = Pose.from_planar(1.0, -2.0, 0.7)
    d = boxminus_pose(q, q)
    np.testing.assert_allclose(d.translation, 0.0, atol=1e-15)
    np.testing.assert_allclose(d.rotation, 0.0, atol=1e-12)


def test_boxminus_pure_translation():
    d = boxminus_pose(Pose(np.array([1.0, 0.0, 0.0])), Pose.identity())
    np.testing.assert_allclose(d.translation, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(d.rotation, 0.0, atol=1e-15)


def test_boxplus_boxminus_roundtrip_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        q_a = random_pose(rng)
        q_b = random_pose(rng)
        q_rec = boxplus_pose(q_a, boxminus_pose(q_b, q_a))
        np.testing.assert_allclose(q_rec.position, q_b.position, atol=1e-9)
        # Quaternion distance up to sign.
        dot = abs(float(np.dot(q_rec.orientation, q_b.orientation)))
        assert 1.0 - dot < 1e-9


# -- interpolation -------------------------------------------------------------


def test_interp_pose_endpoints():
    q_a = Pose.from_planar(0.0, 0.0, 0.0)
    q_b = Pose.from_planar(2.0, 1.0, 1.0)
    for s, ref in ((0.0, q_a), (1.0, q_b)):
        out = interp_pose(q_a, q_b, s)
        np.testing.assert_allclose(out.position, ref.position, atol=1e-15)
        np.testing.assert_allclose(out.orientation, ref.orientation, atol=1e-12)


def test_interp_pose_midpoint_position():
    out = interp_pose(Pose(np.zeros(3)), Pose(np.array([2.0, 0.0, 0.0])), 0.5)
    np.testing.assert_allclose(out.position, [1.0, 0.0, 0.0])


def test_interp_pose_slerp_bisects_angle():
    q_a = Pose.identity()
    q_b = Pose.from_planar(0.0, 0.0, math.pi / 2.0)
    mid = interp_pose(q_a, q_b, 0.5)
    assert abs(mid.yaw - math.pi / 4.0) < 1e-12


def test_interp_pose_positions_stay_on_segment():
    rng = np.random.default_rng(5)
    q_a = random_pose(rng)
    q_b = random_pose(rng)
    direction = q_b.position - q_a.position
    for s in np.linspace(0.0, 1.0, 17):
        p = interp_pose(q_a, q_b, float(s)).position
        np.testing.assert_allclose(p, q_a.position + s * direction, atol=1e-12)


def test_interp_pose_rejects_out_of_range():
    with pytest.raises(ParameterError):
        interp_pose(Pose.identity(), Pose.identity(), 1.5)


def test_interp_control():
    np.testing.assert_allclose(interp_control(np.array([0.0]), np.array([2.0]), 0.5), [1.0])
    np.testing.assert_allclose(interp_control(np.array([3.0, 1.0]), np.array([9.0, 9.0]), 0.0), [3.0, 1.0])
    np.testing.assert_allclose(interp_control(np.array([4.0, 0.0]), np.array([0.0, 8.0]), 0.25), [3.0, 2.0])
    with pytest.raises(ParameterError):
        interp_control(np.zeros(2), np.zeros(3), 0.5)


# -- finite differences ---------------------------------------------------------


def test_finite_diff_uniform_motion():
    window = np.array([[0.0], [1.0], [2.0]])
    vel, acc = finite_diff(window, [1.0, 1.0], order=2)
    np.testing.assert_allclose(vel, [1.0])
    np.testing.assert_allclose(acc, [0.0], atol=1e-15)


def test_finite_diff_exact_for_quadratic_uniform():
    t = np.array([0.0, 1.0, 2.0])
    window = (t**2).reshape(-1, 1)
    vel, acc = finite_diff(window, [1.0, 1.0], order=2)
    np.testing.assert_allclose(acc, [2.0], atol=1e-12)
    np.testing.assert_allclose(vel, [2.0], atol=1e-12)  # derivative at t=1


def test_finite_diff_exact_for_random_quadratics():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b, c = rng.normal(size=3)
        dt = rng.uniform(0.05, 0.5)
        t = np.array([0.0, dt, 2 * dt])
        window = (a * t**2 + b * t + c).reshape(-1, 1)
        vel, acc = finite_diff(window, [dt, dt], order=2)
        np.testing.assert_allclose(acc, [2 * a], atol=1e-12)
        np.testing.assert_allclose(vel, [2 * a * dt + b], atol=1e-12)


def test_finite_diff_nonuniform_grid():
    window = np.array([[0.0], [1.0], [5.0]])
    vel, acc = finite_diff(window, [1.0, 2.0], order=2)
    np.testing.assert_allclose(vel, [5.0 / 3.0])
    np.testing.assert_allclose(acc, [2.0 / 3.0])


def test_finite_diff_first_order_forward():
    (vel,) = finite_diff(np.array([[1.0], [3.0]]), [0.5], order=1)
    np.testing.assert_allclose(vel, [4.0])


def test_finite_diff_rejects_bad_dt():
    with pytest.raises(DegenerateTimestepError):
        finite_diff(np.zeros((3, 1)), [1.0, 0.0], order=2)


def test_finite_diff_wraps_angular_channels():
    window = np.array([[3.1], [-3.1], [-2.9]])  # crosses +pi
    vel, _ = finite_diff(window, [1.0, 1.0], order=2, wrap=np.array([True]))
    # Wrapped diffs: (-6.2 + 2*pi) and 0.2.
    np.testing.assert_allclose(vel, [(2 * math.pi - 6.2 + 0.2) / 2.0], atol=1e-12)


def test_finite_diff_pose_translation_matches_scalar():
    poses = [Pose(np.array([s, 0.0, 0.0])) for s in (0.0, 1.0, 5.0)]
    vel, acc = finite_diff_pose(poses, [1.0, 2.0], order=2)
    np.testing.assert_allclose(vel[:3], [5.0 / 3.0, 0.0, 0.0])
    np.testing.assert_allclose(acc[:3], [2.0 / 3.0, 0.0, 0.0])


def test_finite_diff_pose_yaw_rate():
    # Constant yaw rate 0.5 rad/s about z.
    poses = [Pose.from_planar(0.0, 0.0, 0.5 * t) for t in (0.0, 1.0, 2.0)]
    vel, acc = finite_diff_pose(poses, [1.0, 1.0], order=2)
    np.testing.assert_allclose(vel[3:], [0.0, 0.0, 0.5], atol=1e-12)
    np.testing.assert_allclose(acc[3:], 0.0, atol=1e-12)


def test_pose_delta_angular_part_is_full_rotation_vector():
    q_a = Pose.identity()
    q_b = Pose.from_planar(0.0, 0.0, 0.8)
    d = pose_delta(q_b, q_a)
    np.testing.assert_allclose(d[3:], [0.0, 0.0, 0.8], atol=1e-12)


def test_onesided_velocity_exact_for_quadratic():
    a, b0 = 1.7, -0.4
    dts = [0.3, 0.5]
    t = np.array([0.0, 0.3, 0.8])
    values = (0.5 * a * t**2 + b0 * t).reshape(-1, 1)
    v_start = onesided_velocity(values, dts, at_start=True)
    v_end = onesided_velocity(values, dts, at_start=False)
    np.testing.assert_allclose(v_start, [b0], atol=1e-12)
    np.testing.assert_allclose(v_end, [a * 0.8 + b0], atol=1e-12)


# -- channels -----------------------------------------------------------------


def test_pitch_channel_is_positive_nose_up():
    q = quat_from_yaw_pitch_roll(0.0, 0.3)
    pose = Pose(np.zeros(3), q)
    assert abs(pose.pitch - 0.3) < 1e-12
    # Body x-axis should point above the horizon.
    from modalband.manifold import quat_rotate

    fwd = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
    assert fwd[2] > 0.0


def test_yaw_pitch_roundtrip():
    rng = np.random.default_rng(9)
    for _ in range(30):
        yaw = rng.uniform(-math.pi, math.pi)
        pitch = rng.uniform(-1.2, 1.2)
        pose = Pose(np.zeros(3), quat_from_yaw_pitch_roll(yaw, pitch))
        assert abs(pose.yaw - yaw) < 1e-10
        assert abs(pose.pitch - pitch) < 1e-10
