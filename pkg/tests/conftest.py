"""Shared test oracles, independent of the library's own differencing paths."""

import numpy as np

from modalband.manifold import Pose, quat_from_yaw_pitch_roll


def rk4_rollout(g, q0, qdot0, u_fn, t_end, h):
    """Integrate the second-order ODE qddot = g(q, qdot, u(t)) with classic RK4.

    Returns (times, configs, config_rates) sampled at every integrator step.
    """
    q = np.asarray(q0, dtype=float).copy()
    qd = np.asarray(qdot0, dtype=float).copy()
    n_steps = int(round(t_end / h))
    ts = [0.0]
    qs = [q.copy()]
    qds = [qd.copy()]

    def deriv(t, q, qd):
        return qd, np.asarray(g(q, qd, u_fn(t)), dtype=float)

    for i in range(n_steps):
        t = i * h
        k1q, k1v = deriv(t, q, qd)
        k2q, k2v = deriv(t + h / 2, q + h / 2 * k1q, qd + h / 2 * k1v)
        k3q, k3v = deriv(t + h / 2, q + h / 2 * k2q, qd + h / 2 * k2v)
        k4q, k4v = deriv(t + h, q + h * k3q, qd + h * k3v)
        q = q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        qd = qd + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ts.append((i + 1) * h)
        qs.append(q.copy())
        qds.append(qd.copy())
    return np.array(ts), np.array(qs), np.array(qds)


def pose_from_config(mode, q):
    """Build a Pose whose channels match a mode configuration vector."""
    coords = dict(zip(mode.q_channels, q))
    position = np.array([coords.get("x", 0.0), coords.get("y", 0.0), coords.get("z", 0.0)])
    orientation = quat_from_yaw_pitch_roll(
        coords.get("yaw", 0.0), coords.get("pitch", 0.0), coords.get("roll", 0.0)
    )
    return Pose(position, orientation)


def max_dynamics_residual(mode, ts, qs, u_fn, sample_dt, h_fine):
    """Max dynamics-penalty norm over interior samples taken every sample_dt."""
    from modalband.penalties import dynamics_penalty

    stride = int(round(sample_dt / h_fine))
    idx = np.arange(0, len(ts), stride)
    worst = 0.0
    for j in range(1, len(idx) - 1):
        window = [pose_from_config(mode, qs[idx[j - 1]]), pose_from_config(mode, qs[idx[j]]), pose_from_config(mode, qs[idx[j + 1]])]
        dts = [ts[idx[j]] - ts[idx[j - 1]], ts[idx[j + 1]] - ts[idx[j]]]
        res = dynamics_penalty(window, dts, u_fn(ts[idx[j]]), mode)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst
