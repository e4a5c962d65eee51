"""Outer planning loop: PRM initialization, then repeated segment resizing,
mode pruning, and graph optimization, finishing with trajectory extraction.

Each outer iteration rebuilds the factor graph from the current composite
trajectory (structure changes every iteration), runs a bounded number of
Levenberg-Marquardt steps, and writes the optimized values back.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModeRegistry, TransitionSpec
from .environment import Environment
from .errors import ConfigurationError, DivergenceError, InitializationError
from .graph import CONTROL, POSE, TIMEDELTA, FactorGraph, LmConfig, lm_optimize
from .initialization import PrmConfig, build_initial_trajectory, prm_initial_path
from .manifold import Pose, interp_control, interp_pose
from .penalties import (
    PenaltyWeights,
    boundary_velocity_penalty,
    control_dynamics_penalty,
    control_limit_penalty,
    dynamics_dim,
    dynamics_penalty,
    obstacle_penalty,
    rate_limit_dim,
    rate_limit_penalty,
    state_limit_dim,
    state_limit_penalty,
    time_penalty,
    transition_penalty,
)
from .trajectory import CompositeTrajectory, SegmentTEB, TimedTrajectory, extract_trajectory


@dataclass
class BoundaryState:
    """Start or goal condition: a pose plus an optional prescribed velocity."""

    pose: Pose
    velocity: np.ndarray | None = None


@dataclass
class PlanningProblem:
    registry: ModeRegistry
    env: Environment
    start: BoundaryState
    goal: BoundaryState
    sigma_init: list[str]
    transitions: dict = field(default_factory=dict)  # (from, to) -> TransitionSpec

    def transition_spec(self, from_mode: str, to_mode: str) -> TransitionSpec:
        try:
            return self.transitions[(from_mode, to_mode)]
        except KeyError:
            raise ConfigurationError(
                f"transition {from_mode!r} -> {to_mode!r} is not allowed"
            ) from None


@dataclass
class PlannerConfig:
    n_outer_iterations: int = 40
    lm_inner_iterations: int = 5
    final_polish_iterations: int = 30
    d_min: float = 0.5
    d_max: float = 2.0
    dt_min: float = 0.02
    dt_max: float = 0.3
    dt_init: float = 0.1
    obstacle_margin: float = 0.25
    weights: PenaltyWeights = field(default_factory=PenaltyWeights)
    prm: PrmConfig = field(default_factory=PrmConfig)
    seed: int = 0
    lm_cost_tolerance: float = 1e-8

    def __post_init__(self):
        if not self.d_min < self.d_max:
            raise ConfigurationError("require d_min < d_max")
        if not self.dt_min < self.dt_max:
            raise ConfigurationError("require dt_min < dt_max")


@dataclass
class PlanResult:
    trajectory: CompositeTrajectory
    timed: TimedTrajectory
    mode_sequence: list[str]
    cost_trace: list[dict]  # one row per outer iteration
    accepted_costs: list[list[float]]  # LM accepted-cost sequence per outer iteration
    residual_maxima: dict
    total_time: float


# ---------------------------------------------------------------------------
# Incremental resizing.


def resize_teb(seg: SegmentTEB, config: PlannerConfig) -> SegmentTEB:
    """One structural pass over the segment, in place.

    Removal first: an interior pose goes when its gap to the successor is
    below d_min or its interval below dt_min; the freed time is added to the
    neighboring interval so total trajectory time is conserved. Insertion
    then splits any interval wider than d_max or longer than dt_max at its
    midpoint, halving the time delta. Intervals merged by a removal are not
    split again within the same pass.
    """
    poses, controls, dts = seg.poses, seg.controls, seg.dts
    n = len(poses)

    new_poses = [poses[0]]
    new_controls = [controls[0]]
    new_dts: list[float] = []
    merged_flags: list[bool] = []
    i = 1
    while i < n:
        removable = (
            i < n - 1
            and (
                float(np.linalg.norm(poses[i + 1].position - poses[i].position)) < config.d_min
                or dts[i] < config.dt_min
            )
        )
        if removable:
            new_dts.append(dts[i - 1] + dts[i])
            merged_flags.append(True)
            new_poses.append(poses[i + 1])
            new_controls.append(controls[i + 1])
            i += 2
        else:
            new_dts.append(dts[i - 1])
            merged_flags.append(False)
            new_poses.append(poses[i])
            new_controls.append(controls[i])
            i += 1

    out_poses = [new_poses[0]]
    out_controls = [new_controls[0]]
    out_dts: list[float] = []
    for j in range(len(new_dts)):
        p_a, p_b = new_poses[j], new_poses[j + 1]
        dt = new_dts[j]
        gap = float(np.linalg.norm(p_b.position - p_a.position))
        # Removal has priority over insertion: never split an interval whose
        # halves would immediately qualify for removal again, and leave
        # intervals merged in this pass alone.
        splittable = 0.5 * gap >= config.d_min and 0.5 * dt >= config.dt_min
        if not merged_flags[j] and splittable and (gap > config.d_max or dt > config.dt_max):
            mid_pose = interp_pose(p_a, p_b, 0.5)
            mid_control = interp_control(new_controls[j], new_controls[j + 1], 0.5)
            half = dt / 2.0
            out_poses.append(mid_pose)
            out_controls.append(mid_control)
            out_dts.append(half)
            out_dts.append(half)
        else:
            out_dts.append(dt)
        out_poses.append(p_b)
        out_controls.append(new_controls[j + 1])

    seg.poses = out_poses
    seg.controls = out_controls
    seg.dts = out_dts
    return seg


# ---------------------------------------------------------------------------
# Mode pruning.


def _merge_segments(left: SegmentTEB, right: SegmentTEB, dt_init: float) -> SegmentTEB:
    return SegmentTEB(
        left.mode_id,
        left.poses + right.poses,
        left.controls + right.controls,
        left.dts + [dt_init] + right.dts,
    )


def prune_modes(
    traj: CompositeTrajectory,
    d_min: float,
    dt_init: float,
    start_pose: Pose | None = None,
    goal_pose: Pose | None = None,
) -> CompositeTrajectory:
    """Delete collapsed segments and reconnect their neighbors, to fixed point.

    A segment is collapsed when only its two boundary poses remain within
    d_min of each other. Interior deletions either join the neighbors with a
    new transition or, if they share a mode, merge them with a bridging time
    delta. The segments anchoring the fixed start/goal poses are exempt
    unless the neighbor has already converged onto the anchor, in which case
    the anchor value is handed over to the neighbor's boundary pose.
    """
    segs = traj.segments
    changed = True
    while changed:
        changed = False
        for n, seg in enumerate(segs):
            if len(segs) == 1 or not seg.collapsed(d_min):
                continue
            if n == 0:
                if start_pose is None:
                    continue
                neighbor = segs[1]
                if float(np.linalg.norm(neighbor.poses[0].position - start_pose.position)) >= d_min:
                    continue  # anchor segment stays until the neighbor reaches it
                neighbor.poses[0] = start_pose.copy()
                del segs[0]
            elif n == len(segs) - 1:
                if goal_pose is None:
                    continue
                neighbor = segs[-2]
                if float(np.linalg.norm(neighbor.poses[-1].position - goal_pose.position)) >= d_min:
                    continue
                neighbor.poses[-1] = goal_pose.copy()
                del segs[-1]
            else:
                left, right = segs[n - 1], segs[n + 1]
                del segs[n]
                if left.mode_id == right.mode_id:
                    segs[n - 1] = _merge_segments(left, right, dt_init)
                    del segs[n]
            changed = True
            break
    return traj


# ---------------------------------------------------------------------------
# Graph construction from a composite trajectory.


def build_graph(traj: CompositeTrajectory, problem: PlanningProblem, config: PlannerConfig):
    """Transcribe the trajectory into a factor graph.

    Returns the graph and a per-segment layout (pose_ids, control_ids, dt_ids)
    used to write optimized values back into the trajectory.
    """
    g = FactorGraph()
    weights = config.weights
    env = problem.env
    margin = config.obstacle_margin
    n_segs = len(traj.segments)
    layout = []

    for si, seg in enumerate(traj.segments):
        mode = problem.registry.get(seg.mode_id)
        pose_ids = []
        for i, pose in enumerate(seg.poses):
            fixed = (si == 0 and i == 0) or (si == n_segs - 1 and i == seg.n_poses - 1)
            pose_ids.append(g.add_vertex(POSE, pose.copy(), fixed=fixed))
        control_ids = [g.add_vertex(CONTROL, u.copy()) for u in seg.controls]
        dt_ids = [g.add_vertex(TIMEDELTA, dt) for dt in seg.dts]
        layout.append((pose_ids, control_ids, dt_ids))

        mode_w = mode.objective_weight
        for tid in dt_ids:
            g.add_edge(
                [tid],
                lambda dt, mw=mode_w: time_penalty(dt, mw),
                weights.alpha_obj,
                1,
                tag="time",
            )

        for i in range(1, seg.n_poses - 1):
            g.add_edge(
                [pose_ids[i - 1], pose_ids[i], pose_ids[i + 1], dt_ids[i - 1], dt_ids[i], control_ids[i]],
                lambda qa, qb, qc, d0, d1, u, m=mode: dynamics_penalty([qa, qb, qc], [d0, d1], u, m),
                weights.alpha_con,
                dynamics_dim(mode),
                tag="dynamics",
            )

        if mode.state_bounds:
            for pid in pose_ids:
                g.add_edge(
                    [pid],
                    lambda q, m=mode: state_limit_penalty(q, m),
                    weights.alpha_con,
                    state_limit_dim(mode),
                    tag="state_limit",
                )
        if mode.rate_bounds:
            for i in range(seg.n_poses - 1):
                g.add_edge(
                    [pose_ids[i], pose_ids[i + 1], dt_ids[i]],
                    lambda qa, qb, dt, m=mode: rate_limit_penalty(qa, qb, dt, m),
                    weights.alpha_con,
                    rate_limit_dim(mode),
                    tag="rate_limit",
                )
        for cid in control_ids:
            g.add_edge(
                [cid],
                lambda u, m=mode: control_limit_penalty(u, m),
                weights.alpha_con,
                mode.control_dim,
                tag="control_limit",
            )
        if mode.obstacle_set in env.sets and env.sets[mode.obstacle_set]:
            set_id = mode.obstacle_set
            for pid in pose_ids:
                g.add_edge(
                    [pid],
                    lambda q, s=set_id: obstacle_penalty(q, env, s, margin),
                    weights.alpha_con,
                    1,
                    tag="obstacle",
                )
        if mode.h is not None:
            for i in range(seg.n_poses - 1):
                g.add_edge(
                    [control_ids[i], control_ids[i + 1], dt_ids[i]],
                    lambda ua, ub, dt, m=mode: control_dynamics_penalty(ua, ub, dt, m),
                    weights.alpha_con,
                    mode.control_dim,
                    tag="control_dynamics",
                )

    # Prescribed boundary velocities, substituted through one-sided stencils.
    def add_boundary_edge(seg_layout, seg, v_target, at_start):
        pose_ids, _, dt_ids = seg_layout
        if at_start:
            k = min(3, seg.n_poses)
            pids, tids = pose_ids[:k], dt_ids[: k - 1]
        else:
            k = min(3, seg.n_poses)
            pids, tids = pose_ids[-k:], dt_ids[-(k - 1):]
        n_p = len(pids)
        g.add_edge(
            pids + tids,
            lambda *args, n_p=n_p, v=v_target, s=at_start: boundary_velocity_penalty(
                list(args[:n_p]), list(args[n_p:]), v, at_start=s
            ),
            weights.alpha_con,
            3,
            tag="boundary_velocity",
        )

    if problem.start.velocity is not None:
        add_boundary_edge(layout[0], traj.segments[0], problem.start.velocity, True)
    if problem.goal.velocity is not None:
        add_boundary_edge(layout[-1], traj.segments[-1], problem.goal.velocity, False)

    for si in range(n_segs - 1):
        seg_a, seg_b = traj.segments[si], traj.segments[si + 1]
        tspec = problem.transition_spec(seg_a.mode_id, seg_b.mode_id)
        pa, _, ta = layout[si]
        pb, _, tb = layout[si + 1]
        g.add_edge(
            [pa[-2], pa[-1], ta[-1], pb[0], pb[1], tb[0]],
            lambda q0, q1, d0, q2, q3, d1, ts=tspec: transition_penalty(q0, q1, d0, q2, q3, d1, ts),
            weights.alpha_trans,
            tspec.dim,
            tag="transition",
        )

    return g, layout


def write_back(graph: FactorGraph, layout, traj: CompositeTrajectory):
    for (pose_ids, control_ids, dt_ids), seg in zip(layout, traj.segments):
        seg.poses = [graph.vertices[pid].value for pid in pose_ids]
        seg.controls = [graph.vertices[cid].value for cid in control_ids]
        seg.dts = [graph.vertices[tid].value for tid in dt_ids]


def residual_maxima(traj: CompositeTrajectory, problem: PlanningProblem, config: PlannerConfig) -> dict:
    """Max |residual| per penalty class over the whole trajectory."""
    g, _ = build_graph(traj, problem, config)
    maxima: dict[str, float] = {}
    for edge in g.edges:
        value = float(np.max(np.abs(g.edge_residual(edge))))
        maxima[edge.tag] = max(maxima.get(edge.tag, 0.0), value)
    return maxima


# ---------------------------------------------------------------------------
# Top-level planning loop.


def plan(
    problem: PlanningProblem,
    config: PlannerConfig | None = None,
    warm_start: CompositeTrajectory | None = None,
) -> PlanResult:
    """Full planning run per the outer-loop algorithm.

    Raises InitializationError when no collision-free initial path exists and
    DivergenceError (with the outer iteration index) when the cost becomes
    non-finite.
    """
    config = config or PlannerConfig()
    if not problem.sigma_init:
        raise ConfigurationError("initial mode sequence must be nonempty")
    for mode_id in problem.sigma_init:
        problem.registry.get(mode_id)  # raises on unknown modes

    if warm_start is not None:
        traj = warm_start.copy()
    else:
        traj = _initialize(problem, config)

    cost_trace = []
    accepted_costs = []
    carried_lambda = 1e-4  # damping persists across outer iterations
    for outer in range(config.n_outer_iterations):
        for seg in traj.segments:
            resize_teb(seg, config)
        prune_modes(
            traj,
            config.d_min,
            config.dt_init,
            start_pose=problem.start.pose,
            goal_pose=problem.goal.pose,
        )
        traj.validate()
        graph, layout = build_graph(traj, problem, config)
        lm_config = LmConfig(
            lambda_init=carried_lambda,
            max_inner_iterations=config.lm_inner_iterations,
            cost_tolerance=config.lm_cost_tolerance,
        )
        report = lm_optimize(graph, lm_config)
        carried_lambda = max(report.final_lambda, 1e-10)
        write_back(graph, layout, traj)
        if not math.isfinite(report.final_cost):
            raise DivergenceError(f"cost diverged at outer iteration {outer}", outer)
        cost_trace.append(
            {
                "iteration": outer,
                "cost_before": report.initial_cost,
                "cost_after": report.final_cost,
                "accepted": report.accepted,
                "rejected": report.rejected,
                "segments": len(traj.segments),
                "poses": traj.n_poses(),
            }
        )
        accepted_costs.append(report.cost_history)

    # Final structure is settled; let the optimizer run to convergence on it.
    if config.final_polish_iterations > 0:
        graph, layout = build_graph(traj, problem, config)
        report = lm_optimize(
            graph,
            LmConfig(
                lambda_init=carried_lambda,
                max_inner_iterations=config.final_polish_iterations,
                cost_tolerance=config.lm_cost_tolerance,
            ),
        )
        write_back(graph, layout, traj)
        if not math.isfinite(report.final_cost):
            raise DivergenceError("cost diverged during final polish", config.n_outer_iterations)
        cost_trace.append(
            {
                "iteration": config.n_outer_iterations,
                "cost_before": report.initial_cost,
                "cost_after": report.final_cost,
                "accepted": report.accepted,
                "rejected": report.rejected,
                "segments": len(traj.segments),
                "poses": traj.n_poses(),
            }
        )
        accepted_costs.append(report.cost_history)

    timed = extract_trajectory(traj)
    return PlanResult(
        trajectory=traj,
        timed=timed,
        mode_sequence=traj.mode_sequence,
        cost_trace=cost_trace,
        accepted_costs=accepted_costs,
        residual_maxima=residual_maxima(traj, problem, config),
        total_time=traj.total_time(),
    )


def _initialize(problem: PlanningProblem, config: PlannerConfig) -> CompositeTrajectory:
    set_ids = {problem.registry.get(m).obstacle_set for m in problem.sigma_init}
    set_ids = [s for s in set_ids if s in problem.env.sets]
    last_error: InitializationError | None = None
    prm = problem_prm_config(config)
    for attempt in range(3):
        try:
            path = prm_initial_path(problem.start.pose, problem.goal.pose, problem.env, set_ids, prm)
            break
        except InitializationError as exc:
            last_error = exc
            prm = PrmConfig(
                sample_count=prm.sample_count * 2,
                k_nearest=prm.k_nearest,
                seed=prm.seed + 1,
                connection_margin=prm.connection_margin,
            )
    else:
        raise last_error
    return build_initial_trajectory(
        path,
        problem.sigma_init,
        problem.registry,
        d_min=config.d_min,
        d_max=config.d_max,
        dt_init=config.dt_init,
    )


def problem_prm_config(config: PlannerConfig) -> PrmConfig:
    return PrmConfig(
        sample_count=config.prm.sample_count,
        k_nearest=config.prm.k_nearest,
        seed=config.seed,
        connection_margin=config.prm.connection_margin,
    )
