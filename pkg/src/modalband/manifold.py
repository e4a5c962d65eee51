"""SE(3) pose states, minimal increments, interpolation, and finite differencing.

Poses store orientation as a scalar-first unit quaternion (w, x, y, z);
increments live in a 6-dimensional tangent space (3 translation + 3 rotation).
The rotational increment is the imaginary part of the quaternion logarithm,
i.e. axis * (angle / 2), so ``quat_exp`` / ``quat_log`` round-trip exactly.
Planar vehicles embed as z = 0 with yaw-only rotation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTimestepError, InvalidIncrementError, ParameterError

# Time deltas are floored here after every increment so stencils stay well posed.
DT_FLOOR = 1e-4


# ---------------------------------------------------------------------------
# Quaternion helpers (scalar-first convention).


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_exp(v: np.ndarray) -> np.ndarray:
    """Exponential of the pure quaternion (0, v): rotation by angle 2*|v| about v."""
    angle = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if angle < 1e-12:
        # Second-order series keeps the map smooth through zero.
        s = 1.0 - angle * angle / 6.0
        return np.array([1.0 - angle * angle / 2.0, s * v[0], s * v[1], s * v[2]])
    s = math.sin(angle) / angle
    return np.array([math.cos(angle), s * v[0], s * v[1], s * v[2]])


def quat_log(q: np.ndarray) -> np.ndarray:
    """Inverse of ``quat_exp``; picks the branch with nonnegative scalar part."""
    if q[0] < 0.0:
        q = -q
    vnorm = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if vnorm < 1e-12:
        return np.array([q[1], q[2], q[3]])
    angle = math.atan2(vnorm, q[0])
    return (angle / vnorm) * np.array([q[1], q[2], q[3]])


def quat_rotate(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Rotate vector p by quaternion q."""
    qv = np.array([0.0, p[0], p[1], p[2]])
    return quat_mul(quat_mul(q, qv), quat_conj(q))[1:]


def quat_slerp(qa: np.ndarray, qb: np.ndarray, s: float) -> np.ndarray:
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-10:
        out = (1.0 - s) * qa + s * qb
        return out / np.linalg.norm(out)
    theta = math.acos(min(dot, 1.0))
    sin_theta = math.sin(theta)
    wa = math.sin((1.0 - s) * theta) / sin_theta
    wb = math.sin(s * theta) / sin_theta
    return wa * qa + wb * qb


def quat_from_yaw_pitch_roll(yaw: float, pitch: float = 0.0, roll: float = 0.0) -> np.ndarray:
    """Quaternion for yaw about z, then pitch (positive nose-up), then roll.

    Pitch here is the elevation of the body x-axis, so a positive pitch
    points the nose above the horizon (z-up world).
    """
    qz = np.array([math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0)])
    qy = np.array([math.cos(-pitch / 2.0), 0.0, math.sin(-pitch / 2.0), 0.0])
    qx = np.array([math.cos(roll / 2.0), math.sin(roll / 2.0), 0.0, 0.0])
    return quat_mul(quat_mul(qz, qy), qx)


def yaw_of_quat(q: np.ndarray) -> float:
    w, x, y, z = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def pitch_of_quat(q: np.ndarray) -> float:
    """Elevation of the body x-axis; positive nose-up."""
    w, x, y, z = q
    return -math.asin(max(-1.0, min(1.0, 2.0 * (w * y - z * x))))


def roll_of_quat(q: np.ndarray) -> float:
    w, x, y, z = q
    return math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))


# ---------------------------------------------------------------------------
# Pose and increment types.


class Pose:
    """Rigid-body pose: position in meters plus unit quaternion orientation."""

    __slots__ = ("position", "orientation")

    def __init__(self, position, orientation=None):
        self.position = np.asarray(position, dtype=float)
        if orientation is None:
            self.orientation = np.array([1.0, 0.0, 0.0, 0.0])
        else:
            q = np.asarray(orientation, dtype=float)
            self.orientation = q / np.linalg.norm(q)

    @classmethod
    def _raw(cls, position: np.ndarray, orientation: np.ndarray) -> "Pose":
        """Internal fast path: trusts that the quaternion is already unit."""
        pose = cls.__new__(cls)
        pose.position = position
        pose.orientation = orientation
        return pose

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3))

    @classmethod
    def from_planar(cls, x: float, y: float, yaw: float) -> "Pose":
        return cls(np.array([x, y, 0.0]), quat_from_yaw_pitch_roll(yaw))

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation.copy())

    @property
    def yaw(self) -> float:
        return yaw_of_quat(self.orientation)

    @property
    def pitch(self) -> float:
        return pitch_of_quat(self.orientation)

    @property
    def roll(self) -> float:
        return roll_of_quat(self.orientation)

    def channel(self, name: str) -> float:
        """Scalar coordinate by channel name: x, y, z, roll, pitch, yaw."""
        if name == "x":
            return float(self.position[0])
        if name == "y":
            return float(self.position[1])
        if name == "z":
            return float(self.position[2])
        if name == "yaw":
            return self.yaw
        if name == "pitch":
            return self.pitch
        if name == "roll":
            return self.roll
        raise ParameterError(f"unknown pose channel {name!r}")

    def __repr__(self):
        p = self.position
        return f"Pose(({p[0]:.3f}, {p[1]:.3f}, {p[2]:.3f}), yaw={self.yaw:.3f})"


POSE_CHANNELS = ("x", "y", "z", "roll", "pitch", "yaw")


@dataclass
class PoseIncrement:
    """Minimal 6-dof pose perturbation: translation plus half-angle rotation vector."""

    translation: np.ndarray
    rotation: np.ndarray

    @classmethod
    def zero(cls) -> "PoseIncrement":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "PoseIncrement":
        v = np.asarray(v, dtype=float)
        if v.shape != (6,):
            raise ParameterError(f"pose increment must have dimension 6, got {v.shape}")
        return cls(v[:3], v[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation])


def boxplus_pose(q: Pose, dq: PoseIncrement) -> Pose:
    """Apply a tangent-space increment: translate, then right-compose the rotation."""
    t = dq.translation
    rx, ry, rz = float(dq.rotation[0]), float(dq.rotation[1]), float(dq.rotation[2])
    tx, ty, tz = float(t[0]), float(t[1]), float(t[2])
    if not (
        math.isfinite(tx)
        and math.isfinite(ty)
        and math.isfinite(tz)
        and math.isfinite(rx)
        and math.isfinite(ry)
        and math.isfinite(rz)
    ):
        raise InvalidIncrementError("pose increment contains non-finite values")
    position = q.position + (tx, ty, tz)

    if rx == 0.0 and ry == 0.0 and rz == 0.0:
        return Pose._raw(position, q.orientation)

    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-12:
        s = 1.0 - angle * angle / 6.0
        ew, ex, ey, ez = 1.0 - angle * angle / 2.0, s * rx, s * ry, s * rz
    else:
        s = math.sin(angle) / angle
        ew, ex, ey, ez = math.cos(angle), s * rx, s * ry, s * rz
    aw, ax, ay, az = q.orientation
    ow = aw * ew - ax * ex - ay * ey - az * ez
    ox = aw * ex + ax * ew + ay * ez - az * ey
    oy = aw * ey - ax * ez + ay * ew + az * ex
    oz = aw * ez + ax * ey - ay * ex + az * ew
    inv_norm = 1.0 / math.sqrt(ow * ow + ox * ox + oy * oy + oz * oz)
    orientation = np.array([ow * inv_norm, ox * inv_norm, oy * inv_norm, oz * inv_norm])
    return Pose._raw(position, orientation)


def boxminus_pose(q_b: Pose, q_a: Pose) -> PoseIncrement:
    """Increment d such that boxplus_pose(q_a, d) == q_b."""
    translation = q_b.position - q_a.position
    rotation = quat_log(quat_mul(quat_conj(q_a.orientation), q_b.orientation))
    return PoseIncrement(translation, rotation)


def pose_delta(q_b: Pose, q_a: Pose) -> np.ndarray:
    """6-vector difference: world-frame translation and body-frame rotation vector.

    Unlike ``boxminus_pose`` the rotational part is the full rotation vector
    (axis * angle, twice the quaternion log), so dividing by a time interval
    yields a body-frame angular rate in rad/s.
    """
    d = boxminus_pose(q_b, q_a)
    return np.concatenate([d.translation, 2.0 * d.rotation])


def interp_pose(q_a: Pose, q_b: Pose, s: float) -> Pose:
    """Linear interpolation of position, Slerp of orientation, s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ParameterError(f"interpolation parameter must be in [0, 1], got {s}")
    position = (1.0 - s) * q_a.position + s * q_b.position
    orientation = quat_slerp(q_a.orientation, q_b.orientation, s)
    return Pose(position, orientation)


def interp_control(u_a: np.ndarray, u_b: np.ndarray, s: float) -> np.ndarray:
    u_a = np.asarray(u_a, dtype=float)
    u_b = np.asarray(u_b, dtype=float)
    if u_a.shape != u_b.shape:
        raise ParameterError(f"control dimensions differ: {u_a.shape} vs {u_b.shape}")
    return (1.0 - s) * u_a + s * u_b


# ---------------------------------------------------------------------------
# Finite differencing on nonuniform time grids.
#
# Second-order stencil over (q_{i-1}, q_i, q_{i+1}) with intervals (dt0, dt1):
#   velocity     = (q_{i+1} - q_{i-1}) / (dt0 + dt1)
#   acceleration = 2 [ (q_{i+1} - q_i)/dt1 - (q_i - q_{i-1})/dt0 ] / (dt0 + dt1)
# Exact for quadratics; the acceleration stencil is exact on any grid.


def _check_dts(dts) -> np.ndarray:
    dts = np.asarray(dts, dtype=float)
    if np.any(dts <= 0.0):
        raise DegenerateTimestepError(f"nonpositive time delta in {dts}")
    return dts


_TWO_PI = 2.0 * math.pi


def _wrap_diff(diff: np.ndarray, wrap_idx) -> np.ndarray:
    """Wrap the indexed channels of a difference vector to (-pi, pi]."""
    if wrap_idx is not None:
        for i in wrap_idx:
            v = diff[i]
            if v > math.pi or v <= -math.pi:
                diff[i] = (v + math.pi) % _TWO_PI - math.pi
    return diff


def _stencil1(w0, w1, dt0: float, wrap_idx=None) -> list[np.ndarray]:
    return [_wrap_diff(w1 - w0, wrap_idx) / dt0]


def _stencil2(w0, w1, w2, dt0: float, dt1: float, wrap_idx=None) -> list[np.ndarray]:
    d01 = _wrap_diff(w1 - w0, wrap_idx)
    d12 = _wrap_diff(w2 - w1, wrap_idx)
    total = dt0 + dt1
    vel = (d01 + d12) / total
    acc = (2.0 / total) * (d12 / dt1 - d01 / dt0)
    return [vel, acc]


def finite_diff(window: np.ndarray, dts, order: int, wrap: np.ndarray | None = None) -> list[np.ndarray]:
    """Derivatives of order 1..order at the center of a vector-valued window.

    Args:
        window: (order+1, d) array of stacked configuration vectors.
        dts: the order time intervals separating them.
        order: 1 (forward difference) or 2 (central stencil).
        wrap: optional boolean mask of angular channels; their consecutive
            differences are wrapped to (-pi, pi] before differencing.

    Returns:
        List [first derivative, ..., order-th derivative], each shape (d,).
    """
    window = np.atleast_2d(np.asarray(window, dtype=float))
    dts = _check_dts(dts)
    if window.shape[0] != order + 1:
        raise ParameterError(
            f"window must hold {order + 1} samples for order {order}, got {window.shape[0]}"
        )
    if len(dts) != order:
        raise ParameterError(f"expected {order} time deltas, got {len(dts)}")
    wrap_idx = None if wrap is None else np.flatnonzero(np.asarray(wrap, dtype=bool))

    if order == 1:
        return _stencil1(window[0], window[1], float(dts[0]), wrap_idx)
    if order == 2:
        return _stencil2(window[0], window[1], window[2], float(dts[0]), float(dts[1]), wrap_idx)
    raise ParameterError(f"unsupported derivative order {order}")


def finite_diff_pose(window: list[Pose], dts, order: int) -> list[np.ndarray]:
    """Pose-window version of ``finite_diff``.

    Each derivative is a 6-vector: world-frame linear part followed by
    body-frame angular part (rotation differences taken through the log map).
    """
    dts = _check_dts(dts)
    if len(window) != order + 1:
        raise ParameterError(
            f"window must hold {order + 1} poses for order {order}, got {len(window)}"
        )
    if order == 1:
        return [pose_delta(window[1], window[0]) / dts[0]]
    if order == 2:
        d01 = pose_delta(window[1], window[0])
        d12 = pose_delta(window[2], window[1])
        total = dts[0] + dts[1]
        vel = (d01 + d12) / total
        acc = 2.0 * (d12 / dts[1] - d01 / dts[0]) / total
        return [vel, acc]
    raise ParameterError(f"unsupported derivative order {order}")


def onesided_velocity(values: np.ndarray, dts, at_start: bool, wrap: np.ndarray | None = None) -> np.ndarray:
    """Boundary first derivative from a 3-sample window, exact for quadratics.

    With samples (q0, q1, q2) over intervals (dt0, dt1), the derivative at q0
    is the two-point slope corrected by half the stencil acceleration; the
    derivative at q2 is corrected the opposite way. Falls back to the plain
    two-point slope when only 2 samples are given.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    dts = _check_dts(dts)
    if values.shape[0] == 2:
        return finite_diff(values, dts, order=1, wrap=wrap)[0]
    vel, acc = finite_diff(values, dts, order=2, wrap=wrap)
    if at_start:
        d01 = values[1] - values[0]
        if wrap is not None:
            w = np.asarray(wrap, dtype=bool)
            d01[w] = np.mod(d01[w] + np.pi, 2.0 * np.pi) - np.pi
        return d01 / dts[0] - 0.5 * acc * dts[0]
    d12 = values[2] - values[1]
    if wrap is not None:
        w = np.asarray(wrap, dtype=bool)
        d12[w] = np.mod(d12[w] + np.pi, 2.0 * np.pi) - np.pi
    return d12 / dts[1] + 0.5 * acc * dts[1]
