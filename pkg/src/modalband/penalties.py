"""Residual functions transcribing the objective and constraints of the
trajectory problem into weighted least-squares penalty terms.

Equality-style constraints (dynamics, transitions) become signed difference
residuals; inequality constraints become hinge residuals that vanish on the
feasible set and grow linearly outside it. All residuals are plain vectors:
the squaring happens in the graph cost, so signs are irrelevant there but
keep the numeric Jacobians smooth.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ModeSpec, TransitionSpec
from .environment import Environment
from .errors import ConfigurationError
from .manifold import Pose, finite_diff

_SOFT_NORM_EPS = 1e-12


@dataclass
class PenaltyWeights:
    """Edge weights: constraints and transitions must dominate the objective."""

    alpha_obj: float = 1.0
    alpha_con: float = 100.0
    alpha_trans: float = 100.0

    def __post_init__(self):
        if min(self.alpha_obj, self.alpha_con, self.alpha_trans) <= 0:
            raise ConfigurationError("penalty weights must be positive")


def hinge(value: float, lo: float, hi: float) -> float:
    return max(0.0, value - hi) + max(0.0, lo - value)


def time_penalty(dt: float, mode_weight: float = 1.0) -> np.ndarray:
    """Residual sqrt(w) * dt, so the squared cost is w * dt^2."""
    return np.array([math.sqrt(mode_weight) * dt])


def config_window(poses: list[Pose], mode: ModeSpec) -> np.ndarray:
    """Stack the mode's configuration vectors for a pose window."""
    return np.array([mode.config_vector(p) for p in poses])


def config_derivatives(poses: list[Pose], dts, mode: ModeSpec) -> list[np.ndarray]:
    """Finite-difference derivatives of the mode configuration, angles wrapped."""
    return finite_diff(config_window(poses, mode), dts, order=mode.order, wrap=mode.wrap_mask)


def _wrap_cache(mode: ModeSpec):
    """Indices of angular configuration channels, or None when there are none."""
    wrap = mode.__dict__.get("_wrap_cache")
    if wrap is None:
        idx = tuple(int(i) for i in np.flatnonzero(mode.wrap_mask))
        wrap = idx if idx else False
        mode.__dict__["_wrap_cache"] = wrap
    return None if wrap is False else wrap


def dynamics_penalty(poses: list[Pose], dts, u: np.ndarray, mode: ModeSpec) -> np.ndarray:
    """Difference between measured configuration acceleration and the model's.

    For a second-order mode the window is (q_{i-1}, q_i, q_{i+1}) with its two
    time deltas. Extra kinematic channels (lateral slip, velocity alignment)
    are stacked after the acceleration channels.
    """
    from .manifold import _stencil1, _stencil2

    wrap = _wrap_cache(mode)
    if mode.order == 1:
        w0, w1 = mode.config_vector(poses[0]), mode.config_vector(poses[1])
        (rate,) = _stencil1(w0, w1, float(dts[0]), wrap)
        return rate - np.asarray(mode.g(w0, u), dtype=float)
    w0 = mode.config_vector(poses[0])
    w1 = mode.config_vector(poses[1])
    w2 = mode.config_vector(poses[2])
    qdot, qddot = _stencil2(w0, w1, w2, float(dts[0]), float(dts[1]), wrap)
    residual = qddot - mode.g(w1, qdot, u)
    if mode.kinematic_residual is not None:
        return np.concatenate([residual, mode.kinematic_residual(w1, qdot, u)])
    return residual


def dynamics_dim(mode: ModeSpec) -> int:
    return len(mode.q_channels) + mode.kinematic_dim


def control_dynamics_penalty(u_a: np.ndarray, u_b: np.ndarray, dt: float, mode: ModeSpec) -> np.ndarray:
    """Forward-difference control rate minus the servo model h."""
    rate = (np.asarray(u_b, dtype=float) - np.asarray(u_a, dtype=float)) / dt
    return rate - np.asarray(mode.h(u_a), dtype=float)


def _bound_extractor(mode: ModeSpec):
    from .dynamics import _build_extractor

    extractor = mode.__dict__.get("_bound_extractor")
    if extractor is None:
        channels = tuple(mode.state_bounds)
        lows = np.array([mode.state_bounds[c][0] for c in channels])
        highs = np.array([mode.state_bounds[c][1] for c in channels])
        extractor = (_build_extractor(channels), lows, highs)
        mode.__dict__["_bound_extractor"] = extractor
    return extractor


def state_limit_penalty(pose: Pose, mode: ModeSpec) -> np.ndarray:
    """Elementwise hinge on the mode's bounded pose channels."""
    extract, lows, highs = _bound_extractor(mode)
    values = extract(pose)
    return np.maximum(0.0, values - highs) + np.maximum(0.0, lows - values)


def state_limit_dim(mode: ModeSpec) -> int:
    return len(mode.state_bounds)


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def interval_rate(kind: str, pose_a: Pose, pose_b: Pose, dt: float) -> float:
    """Two-point derivative quantity over one interval, by rate-bound kind."""
    pa, pb = pose_a.position, pose_b.position
    dx = (pb[0] - pa[0]) / dt
    dy = (pb[1] - pa[1]) / dt
    if kind == "speed":
        dz = (pb[2] - pa[2]) / dt
        return math.sqrt(dx * dx + dy * dy + dz * dz + _SOFT_NORM_EPS)
    if kind == "speed_xy":
        return math.sqrt(dx * dx + dy * dy + _SOFT_NORM_EPS)
    if kind == "forward_speed":
        yaw_a = pose_a.yaw
        mid_yaw = yaw_a + 0.5 * _wrap_angle(pose_b.yaw - yaw_a)
        return dx * math.cos(mid_yaw) + dy * math.sin(mid_yaw)
    if kind == "climb_rate":
        return (pb[2] - pa[2]) / dt
    if kind == "yaw_rate":
        return _wrap_angle(pose_b.yaw - pose_a.yaw) / dt
    raise ConfigurationError(f"unknown rate bound kind {kind!r}")


def rate_limit_penalty(pose_a: Pose, pose_b: Pose, dt: float, mode: ModeSpec) -> np.ndarray:
    """Hinge on interval-wise derivative bounds (speed limits, stall floor, ...)."""
    return np.array(
        [
            hinge(interval_rate(kind, pose_a, pose_b, dt), lo, hi)
            for kind, (lo, hi) in mode.rate_bounds.items()
        ]
    )


def rate_limit_dim(mode: ModeSpec) -> int:
    return len(mode.rate_bounds)


def control_limit_penalty(u: np.ndarray, mode: ModeSpec) -> np.ndarray:
    lo = mode.control_bounds[:, 0]
    hi = mode.control_bounds[:, 1]
    u = np.asarray(u, dtype=float)
    return np.maximum(0.0, u - hi) + np.maximum(0.0, lo - u)


def obstacle_penalty(pose: Pose, env: Environment, set_id: str, margin: float = 0.0) -> np.ndarray:
    """max(0, margin - signed distance); margin 0 penalizes only penetration."""
    sd = env.signed_distance(pose.position, set_id)
    return np.array([max(0.0, margin - sd)])


def boundary_velocity_penalty(poses: list[Pose], dts, v_target: np.ndarray, at_start: bool) -> np.ndarray:
    """Difference between the one-sided boundary velocity estimate and a target.

    Used to substitute prescribed start/goal velocities into the graph. With a
    3-pose window the estimate is exact for quadratic motion; a 2-pose window
    falls back to the interval slope.
    """
    positions = np.array([p.position for p in poses])
    from .manifold import onesided_velocity

    v = onesided_velocity(positions, dts, at_start=at_start)
    return v - np.asarray(v_target, dtype=float)


def transition_penalty(
    tail_prev: Pose,
    tail: Pose,
    dt_tail: float,
    head: Pose,
    head_next: Pose,
    dt_head: float,
    spec: TransitionSpec,
) -> np.ndarray:
    """Continuity residual across a mode boundary.

    The tail state is the last pose of the earlier segment with its backward
    interval velocity; the head state is the first pose of the later segment
    with its forward interval velocity. Channels are stacked in the order the
    TransitionSpec lists them, each scaled by sqrt of its channel weight.
    """
    parts = []
    for name, weight in spec.channels:
        w = math.sqrt(weight)
        if name == "position":
            parts.append(w * (head.position - tail.position))
        elif name == "velocity":
            v_tail = (tail.position - tail_prev.position) / dt_tail
            v_head = (head_next.position - head.position) / dt_head
            parts.append(w * (v_head - v_tail))
        elif name == "yaw":
            parts.append([w * _wrap_angle(head.yaw - tail.yaw)])
        elif name == "pitch":
            parts.append([w * (head.pitch - tail.pitch)])
        elif name == "roll":
            parts.append([w * (head.roll - tail.roll)])
    return np.concatenate([np.atleast_1d(p) for p in parts])
