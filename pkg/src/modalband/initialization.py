"""Sampling-based initialization: a PRM finds a collision-free geometric path,
which is split into equal-length single-mode spans and discretized into an
initial composite trajectory.

The initializer only cares about obstacle clearance; dynamic feasibility of
the initial guess is the optimizer's problem. Time deltas start at a small
positive value and controls at the midpoint of their bounds.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .environment import Environment
from .errors import ConfigurationError, InitializationError
from .manifold import Pose, interp_pose, quat_from_yaw_pitch_roll
from .trajectory import CompositeTrajectory, SegmentTEB


@dataclass
class PrmConfig:
    sample_count: int = 500
    k_nearest: int = 10
    seed: int = 0
    connection_margin: float = 0.25

    def __post_init__(self):
        if self.sample_count <= 0 or self.k_nearest < 1:
            raise ConfigurationError("sample count must be positive and k_nearest >= 1")


def looping_mode_sequence(modes: list[str], n_transitions: int) -> list[str]:
    """Initialization sequence cycling through all modes n_transitions times.

    Pruning can reach any subsequence of this, so it lets the optimizer
    discover how many of the allowed transitions are actually needed.
    """
    if not modes:
        raise ConfigurationError("mode list must be nonempty")
    if n_transitions < 1:
        raise ConfigurationError("need at least one repetition")
    return list(modes) * n_transitions


def _facing(p_from: np.ndarray, p_to: np.ndarray) -> np.ndarray:
    d = p_to - p_from
    return quat_from_yaw_pitch_roll(math.atan2(d[1], d[0]))


def _shortcut(points: list[np.ndarray], env: Environment, set_ids, margin: float) -> list[np.ndarray]:
    """Greedy pass connecting each waypoint to the farthest visible successor."""
    out = [points[0]]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not env.segment_clear_of_union(points[i], points[j], set_ids, margin):
            j -= 1
        out.append(points[j])
        i = j
    return out


def prm_initial_path(
    start: Pose,
    goal: Pose,
    env: Environment,
    set_ids,
    config: PrmConfig,
) -> list[Pose]:
    """Collision-free waypoint poses from start to goal.

    Intermediate waypoints face the next waypoint (yaw only); the first and
    last keep the start/goal orientations. Deterministic for a fixed seed.
    """
    set_ids = list(set_ids)
    sp = np.asarray(start.position, dtype=float)
    gp = np.asarray(goal.position, dtype=float)
    margin = config.connection_margin

    if float(np.linalg.norm(gp - sp)) < 1e-12:
        return [start]

    for name, p in (("start", sp), ("goal", gp)):
        if env.union_distance(p, set_ids) <= margin:
            raise InitializationError(f"{name} position is not clear of obstacles")

    if env.segment_clear_of_union(sp, gp, set_ids, margin):
        return [start, goal]

    rng = np.random.default_rng(config.seed)
    lo, hi = env.workspace_lo, env.workspace_hi
    samples = np.empty((0, 3))
    for _ in range(20):
        if len(samples) >= config.sample_count:
            break
        batch = rng.uniform(lo, hi, size=(config.sample_count, 3))
        clear = np.full(len(batch), True)
        for sid in set_ids:
            clear &= env.batch_signed_distance(batch, sid) > margin
        samples = np.vstack([samples, batch[clear]])
    samples = samples[: config.sample_count]
    nodes = np.vstack([sp[None, :], gp[None, :], samples])

    tree = cKDTree(nodes)
    k = min(config.k_nearest + 1, len(nodes))
    _, neighbor_idx = tree.query(nodes, k=k)
    rows, cols, weights = [], [], []
    checked = set()
    for i in range(len(nodes)):
        for j in np.atleast_1d(neighbor_idx[i]):
            j = int(j)
            if j == i or (min(i, j), max(i, j)) in checked:
                continue
            checked.add((min(i, j), max(i, j)))
            if env.segment_clear_of_union(nodes[i], nodes[j], set_ids, margin):
                w = float(np.linalg.norm(nodes[i] - nodes[j]))
                rows += [i, j]
                cols += [j, i]
                weights += [w, w]

    adjacency = coo_matrix((weights, (rows, cols)), shape=(len(nodes), len(nodes))).tocsr()
    dist, predecessors = dijkstra(
        adjacency, directed=False, indices=0, return_predecessors=True
    )
    if not np.isfinite(dist[1]):
        raise InitializationError(
            f"no collision-free path found with {config.sample_count} samples"
        )

    order = [1]
    while order[-1] != 0:
        order.append(int(predecessors[order[-1]]))
    points = [nodes[i] for i in reversed(order)]
    points = _shortcut(points, env, set_ids, margin)

    waypoints = [start]
    for i in range(1, len(points) - 1):
        waypoints.append(Pose(points[i], _facing(points[i], points[i + 1])))
    waypoints.append(goal)
    return waypoints


class _Polyline:
    """Arc-length parametrized pose interpolation along waypoints."""

    def __init__(self, waypoints: list[Pose]):
        self.waypoints = waypoints
        lengths = [
            float(np.linalg.norm(b.position - a.position))
            for a, b in zip(waypoints, waypoints[1:])
        ]
        self.cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        self.total = float(self.cumulative[-1])

    def pose_at(self, s: float) -> Pose:
        s = min(max(s, 0.0), self.total)
        idx = int(np.searchsorted(self.cumulative, s, side="right")) - 1
        idx = min(max(idx, 0), len(self.waypoints) - 2)
        span = self.cumulative[idx + 1] - self.cumulative[idx]
        frac = 0.0 if span <= 0 else (s - self.cumulative[idx]) / span
        return interp_pose(self.waypoints[idx], self.waypoints[idx + 1], float(frac))


def build_initial_trajectory(
    waypoints: list[Pose],
    sigma_init: list[str],
    registry,
    d_min: float = 0.5,
    d_max: float = 2.0,
    dt_init: float = 0.1,
) -> CompositeTrajectory:
    """Split the geometric path into equal-length spans, one per mode in the
    initial sequence, and discretize each at the midpoint target spacing."""
    if not sigma_init:
        raise ConfigurationError("initial mode sequence must be nonempty")
    if not waypoints:
        raise ConfigurationError("need at least one waypoint")
    if len(waypoints) == 1:
        waypoints = [waypoints[0], waypoints[0]]
    # Adjacent duplicates carry no transition; collapse them up front.
    sigma_init = [m for i, m in enumerate(sigma_init) if i == 0 or m != sigma_init[i - 1]]

    line = _Polyline(waypoints)
    n_segments = len(sigma_init)
    span = line.total / n_segments
    spacing = 0.5 * (d_min + d_max)

    segments = []
    for m, mode_id in enumerate(sigma_init):
        mode = registry.get(mode_id)
        s0 = m * span
        n_intervals = max(1, int(round(span / spacing))) if span > 0 else 1
        stations = s0 + np.linspace(0.0, span, n_intervals + 1)
        poses = [line.pose_at(float(s)) for s in stations]
        controls = [mode.mean_control() for _ in poses]
        dts = [dt_init] * n_intervals
        segments.append(SegmentTEB(mode_id, poses, controls, dts))

    segments[0].poses[0] = waypoints[0].copy()
    segments[-1].poses[-1] = waypoints[-1].copy()
    traj = CompositeTrajectory(segments)
    for seg in traj.segments:
        seg.validate()
    return traj
