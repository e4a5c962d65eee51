import numpy as np
import pytest

from modalband.dynamics import builtin_registry
from modalband.environment import Box, Environment, Sphere
from modalband.errors import ConfigurationError, InitializationError
from modalband.initialization import (
    PrmConfig,
    build_initial_trajectory,
    looping_mode_sequence,
    prm_initial_path,
)
from modalband.manifold import Pose


@pytest.fixture
def registry():
    return builtin_registry()


def empty_env():
    return Environment(sets={"default": []}, workspace_lo=np.array([-5.0, -20.0, 0.0]), workspace_hi=np.array([120.0, 20.0, 20.0]))


# -- looping mode sequence ---------------------------------------------------------


def test_looping_sequence_two_modes_three_transitions():
    assert looping_mode_sequence(["taxi", "flight"], 3) == [
        "taxi",
        "flight",
        "taxi",
        "flight",
        "taxi",
        "flight",
    ]


def test_looping_sequence_single():
    assert looping_mode_sequence(["hover"], 1) == ["hover"]


def test_looping_sequence_three_modes_twice():
    seq = looping_mode_sequence(["A", "B", "C"], 2)
    assert len(seq) == 6
    assert seq == ["A", "B", "C", "A", "B", "C"]


def test_looping_sequence_rejects_empty():
    with pytest.raises(ConfigurationError):
        looping_mode_sequence([], 2)


# -- PRM ----------------------------------------------------------------------------


def test_prm_straight_line_in_empty_environment():
    env = empty_env()
    start = Pose.from_planar(0, 0, 0)
    goal = Pose.from_planar(50, 0, 0)
    path = prm_initial_path(start, goal, env, ["default"], PrmConfig(seed=1))
    assert len(path) == 2
    np.testing.assert_allclose(path[0].position, start.position)
    np.testing.assert_allclose(path[1].position, goal.position)


def test_prm_start_equals_goal():
    env = empty_env()
    p = Pose.from_planar(3, 3, 0)
    path = prm_initial_path(p, p, env, ["default"], PrmConfig(seed=1))
    assert len(path) == 1


def test_prm_goal_inside_obstacle_fails():
    env = Environment(
        sets={"default": [Sphere(center=np.array([50.0, 0.0, 0.0]), radius=3.0)]},
        workspace_lo=np.array([-5.0, -20.0, 0.0]),
        workspace_hi=np.array([60.0, 20.0, 20.0]),
    )
    with pytest.raises(InitializationError):
        prm_initial_path(
            Pose.from_planar(0, 0, 0), Pose.from_planar(50, 0, 0), env, ["default"], PrmConfig(seed=1)
        )


def test_prm_path_through_wall_gap_is_collision_free():
    # Wall across the corridor with a gap on one side.
    wall = Box(lo=np.array([24.0, -20.0, 0.0]), hi=np.array([26.0, 10.0, 20.0]))
    env = Environment(
        sets={"default": [wall]},
        workspace_lo=np.array([-5.0, -20.0, 0.0]),
        workspace_hi=np.array([60.0, 20.0, 20.0]),
    )
    config = PrmConfig(sample_count=800, seed=4)
    path = prm_initial_path(
        Pose.from_planar(0, 0, 0), Pose.from_planar(50, 0, 0), env, ["default"], config
    )
    assert len(path) >= 3
    # Independent check of every leg with the collision oracle.
    for a, b in zip(path, path[1:]):
        assert env.segment_collision_free(a.position, b.position, "default", margin=config.connection_margin)


def test_prm_deterministic_for_fixed_seed():
    wall = Box(lo=np.array([24.0, -20.0, 0.0]), hi=np.array([26.0, 10.0, 20.0]))
    env = Environment(
        sets={"default": [wall]},
        workspace_lo=np.array([-5.0, -20.0, 0.0]),
        workspace_hi=np.array([60.0, 20.0, 20.0]),
    )
    args = (Pose.from_planar(0, 0, 0), Pose.from_planar(50, 0, 0), env, ["default"])
    p1 = prm_initial_path(*args, PrmConfig(sample_count=500, seed=9))
    p2 = prm_initial_path(*args, PrmConfig(sample_count=500, seed=9))
    assert len(p1) == len(p2)
    for a, b in zip(p1, p2):
        np.testing.assert_array_equal(a.position, b.position)


# -- initial trajectory ----------------------------------------------------------------


def test_build_straight_trajectory_pose_count(registry):
    # 100 m path at 2 m target spacing: 51 poses, all dt at the initial value.
    waypoints = [Pose.from_planar(0, 0, 0), Pose.from_planar(100, 0, 0)]
    traj = build_initial_trajectory(waypoints, ["taxi"], registry, d_min=1.0, d_max=3.0, dt_init=0.1)
    assert len(traj.segments) == 1
    seg = traj.segments[0]
    assert seg.n_poses == 51
    assert all(dt == 0.1 for dt in seg.dts)


def test_build_two_mode_trajectory_equal_split(registry):
    waypoints = [Pose.from_planar(0, 0, 0), Pose.from_planar(100, 0, 0)]
    traj = build_initial_trajectory(waypoints, ["taxi", "flight"], registry)
    assert traj.mode_sequence == ["taxi", "flight"]
    a, b = traj.segments
    assert a.arc_length() == pytest.approx(50.0, abs=1e-9)
    assert b.arc_length() == pytest.approx(50.0, abs=1e-9)
    # Segments meet at the split point.
    np.testing.assert_allclose(a.poses[-1].position, b.poses[0].position, atol=1e-9)


def test_build_initial_controls_mean_of_bounds(registry):
    waypoints = [Pose.from_planar(0, 0, 0), Pose.from_planar(10, 0, 0)]
    traj = build_initial_trajectory(waypoints, ["taxi"], registry)
    for u in traj.segments[0].controls:
        np.testing.assert_allclose(u, 0.0)  # taxi bounds are symmetric


def test_build_degenerate_start_equals_goal(registry):
    traj = build_initial_trajectory([Pose.from_planar(1, 1, 0)], ["taxi"], registry)
    seg = traj.segments[0]
    assert seg.n_poses == 2
    np.testing.assert_allclose(seg.poses[0].position, seg.poses[1].position)


def test_initial_trajectory_clear_of_obstacles(registry):
    wall = Box(lo=np.array([24.0, -20.0, 0.0]), hi=np.array([26.0, 10.0, 20.0]))
    env = Environment(
        sets={"default": [wall]},
        workspace_lo=np.array([-5.0, -20.0, 0.0]),
        workspace_hi=np.array([60.0, 20.0, 20.0]),
    )
    config = PrmConfig(sample_count=800, seed=4)
    path = prm_initial_path(
        Pose.from_planar(0, 0, 0), Pose.from_planar(50, 0, 0), env, ["default"], config
    )
    traj = build_initial_trajectory(path, ["taxi", "flight", "taxi"], registry)
    for seg in traj.segments:
        for pose in seg.poses:
            assert env.signed_distance(pose.position, "default") > 0.0
