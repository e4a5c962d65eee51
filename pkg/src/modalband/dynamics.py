"""Vehicle dynamics modes: taxiing car, point-mass airplane, multicopter hover.

A mode bundles the second-order configuration dynamics ``g`` (returning the
expected configuration accelerations), optional kinematic residual channels
(nonholonomic or alignment constraints the acceleration-level transcription
cannot see), optional first-order control servo dynamics ``h``, bounds, an
objective weight, and the obstacle set the mode must respect.

Configuration vectors are named channel selections from the pose: planar taxi
uses (x, y, yaw); flight uses (x, y, z, pitch, yaw) with pitch positive
nose-up; hover uses (x, y, z, yaw).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParameterError

ANGULAR_CHANNELS = frozenset({"roll", "pitch", "yaw"})

# Rate-bound kinds understood by the state-feasibility penalties.
RATE_KINDS = ("speed", "speed_xy", "forward_speed", "climb_rate", "yaw_rate")


@dataclass
class ModeSpec:
    mode_id: str
    order: int
    q_channels: tuple
    g: object  # callable(q, qdot, u) -> accelerations, len(q_channels)
    control_dim: int
    control_bounds: np.ndarray  # (control_dim, 2)
    kinematic_residual: object = None  # callable(q, qdot, u) -> extra channels
    kinematic_dim: int = 0
    h: object = None  # callable(u) -> du/dt, first-order servo dynamics
    state_bounds: dict = field(default_factory=dict)  # channel -> (lo, hi)
    rate_bounds: dict = field(default_factory=dict)  # kind -> (lo, hi)
    objective_weight: float = 1.0
    obstacle_set: str = "default"

    def __post_init__(self):
        self.control_bounds = np.asarray(self.control_bounds, dtype=float).reshape(-1, 2)
        if self.control_bounds.shape[0] != self.control_dim:
            raise ConfigurationError(
                f"mode {self.mode_id!r}: control bounds shape does not match dimension"
            )
        if np.any(self.control_bounds[:, 0] > self.control_bounds[:, 1]):
            raise ConfigurationError(f"mode {self.mode_id!r}: control bounds out of order")
        for name, (lo, hi) in self.state_bounds.items():
            if name not in ("x", "y", "z", "roll", "pitch", "yaw"):
                raise ConfigurationError(f"mode {self.mode_id!r}: unknown state channel {name!r}")
            if lo > hi:
                raise ConfigurationError(f"mode {self.mode_id!r}: bounds for {name!r} out of order")
        for kind in self.rate_bounds:
            if kind not in RATE_KINDS:
                raise ConfigurationError(f"mode {self.mode_id!r}: unknown rate bound {kind!r}")
        if self.objective_weight <= 0:
            raise ConfigurationError(f"mode {self.mode_id!r}: objective weight must be positive")

    @property
    def wrap_mask(self) -> np.ndarray:
        return np.array([c in ANGULAR_CHANNELS for c in self.q_channels])

    def config_vector(self, pose) -> np.ndarray:
        # Hot path during numeric differentiation; avoid per-channel dispatch.
        extractor = self.__dict__.get("_extractor")
        if extractor is None:
            extractor = _build_extractor(self.q_channels)
            self.__dict__["_extractor"] = extractor
        return extractor(pose)

    def mean_control(self) -> np.ndarray:
        """Midpoint of the control bounds; unbounded channels initialize to zero."""
        lo, hi = self.control_bounds[:, 0], self.control_bounds[:, 1]
        mid = 0.5 * (lo + hi)
        mid[~np.isfinite(mid)] = 0.0
        return mid


_POSITION_INDEX = {"x": 0, "y": 1, "z": 2}


def _build_extractor(q_channels):
    """Compile a channel tuple into a single-pass pose-to-vector function."""
    pos_slots = [(i, _POSITION_INDEX[c]) for i, c in enumerate(q_channels) if c in _POSITION_INDEX]
    ang_slots = [(i, c) for i, c in enumerate(q_channels) if c not in _POSITION_INDEX]
    n = len(q_channels)

    def extract(pose) -> np.ndarray:
        out = np.empty(n)
        p = pose.position
        for i, j in pos_slots:
            out[i] = p[j]
        if ang_slots:
            w, x, y, z = pose.orientation
            for i, name in ang_slots:
                if name == "yaw":
                    out[i] = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
                elif name == "pitch":
                    out[i] = -math.asin(max(-1.0, min(1.0, 2.0 * (w * y - z * x))))
                else:
                    out[i] = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
        return out

    return extract


@dataclass
class TransitionSpec:
    from_mode: str
    to_mode: str
    channels: list = field(default_factory=lambda: [("position", 1.0), ("velocity", 1.0)])

    def __post_init__(self):
        allowed = {"position", "velocity", "yaw", "pitch", "roll"}
        normalized = []
        for entry in self.channels:
            if isinstance(entry, str):
                entry = (entry, 1.0)
            name, weight = entry
            if name not in allowed:
                raise ConfigurationError(f"unknown transition channel {name!r}")
            normalized.append((name, float(weight)))
        self.channels = normalized

    @property
    def dim(self) -> int:
        return sum(3 if name in ("position", "velocity") else 1 for name, _ in self.channels)


# ---------------------------------------------------------------------------
# Dubins car (taxi mode): second-order planar motion with commanded
# longitudinal acceleration and steering angle, rear-axle kinematics.


def make_dubins_g(wheelbase: float = 2.5):
    if wheelbase <= 0:
        raise ConfigurationError("wheelbase must be positive")

    def dubins_g(q, qdot, u):
        a_des, steer = float(u[0]), float(u[1])
        if abs(steer) >= math.pi / 2:
            raise ParameterError(f"steering angle {steer} out of (-pi/2, pi/2)")
        yaw = q[2]
        c, s = math.cos(yaw), math.sin(yaw)
        v = qdot[0] * c + qdot[1] * s
        omega = v * math.tan(steer) / wheelbase
        return np.array(
            [
                a_des * c - v * omega * s,
                a_des * s + v * omega * c,
                a_des * math.tan(steer) / wheelbase,
            ]
        )

    return dubins_g


def make_dubins_slip():
    def lateral_slip(q, qdot, u):
        yaw = q[2]
        return np.array([-qdot[0] * math.sin(yaw) + qdot[1] * math.cos(yaw)])

    return lateral_slip


def make_dubins_mode(
    mode_id: str = "taxi",
    wheelbase: float = 2.5,
    accel_bounds=(-2.0, 2.0),
    steer_bounds=(-0.6, 0.6),
    speed_limit: float = 10.0,
    reverse_limit: float = 0.0,
    objective_weight: float = 1.0,
    obstacle_set: str = "default",
    state_bounds: dict | None = None,
    rate_bounds: dict | None = None,
) -> ModeSpec:
    bounds = {"z": (0.0, 0.0), "pitch": (0.0, 0.0)}
    if state_bounds:
        bounds.update(state_bounds)
    rates = {"forward_speed": (-reverse_limit if reverse_limit else 0.0, speed_limit)}
    if rate_bounds:
        rates.update(rate_bounds)
    return ModeSpec(
        mode_id=mode_id,
        order=2,
        q_channels=("x", "y", "yaw"),
        g=make_dubins_g(wheelbase),
        kinematic_residual=make_dubins_slip(),
        kinematic_dim=1,
        control_dim=2,
        control_bounds=np.array([accel_bounds, steer_bounds]),
        state_bounds=bounds,
        rate_bounds=rates,
        objective_weight=objective_weight,
        obstacle_set=obstacle_set,
    )


# ---------------------------------------------------------------------------
# Point-mass airplane (flight mode): thrust, relative lift coefficient, and
# roll angle drive a quadratic lift/drag model in flight-path coordinates.
# The pitch/yaw accelerations converge the measured Euler rates to the rates
# implied by the force balance (first-order, gain rate_gain).


def make_airplane_g(
    mass: float = 1.0,
    gravity: float = 9.81,
    lift_gain: float = 0.5,
    drag_base: float = 0.02,
    drag_induced: float = 0.05,
    rate_gain: float = 2.0,
    speed_floor: float = 1.0,
):
    def airplane_g(q, qdot, u):
        thrust, c_lift, roll = float(u[0]), float(u[1]), float(u[2])
        pitch, yaw = q[3], q[4]
        v = max(math.sqrt(qdot[0] ** 2 + qdot[1] ** 2 + qdot[2] ** 2), speed_floor)
        lift = lift_gain * c_lift * v * v
        drag = (drag_base + drag_induced * c_lift * c_lift) * v * v
        v_dot = (thrust - drag) / mass - gravity * math.sin(pitch)
        pitch_rate = (lift * math.cos(roll) / mass - gravity * math.cos(pitch)) / v
        cos_pitch = max(math.cos(pitch), 0.1)
        yaw_rate = lift * math.sin(roll) / (mass * v * cos_pitch)

        cp, sp = math.cos(pitch), math.sin(pitch)
        cy, sy = math.cos(yaw), math.sin(yaw)
        return np.array(
            [
                v_dot * cp * cy - v * pitch_rate * sp * cy - v * yaw_rate * cp * sy,
                v_dot * cp * sy - v * pitch_rate * sp * sy + v * yaw_rate * cp * cy,
                v_dot * sp + v * pitch_rate * cp,
                rate_gain * (pitch_rate - qdot[3]),
                rate_gain * (yaw_rate - qdot[4]),
            ]
        )

    return airplane_g


def make_airplane_alignment(speed_floor: float = 1.0):
    """Coordinated-flight residual: velocity must point along the body x-axis."""

    def alignment(q, qdot, u):
        pitch, yaw = q[3], q[4]
        v = max(math.sqrt(qdot[0] ** 2 + qdot[1] ** 2 + qdot[2] ** 2), speed_floor)
        direction = np.array(
            [math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), math.sin(pitch)]
        )
        return np.asarray(qdot[:3]) - v * direction

    return alignment


def make_airplane_mode(
    mode_id: str = "flight",
    mass: float = 1.0,
    gravity: float = 9.81,
    lift_gain: float = 0.5,
    drag_base: float = 0.02,
    drag_induced: float = 0.05,
    rate_gain: float = 2.0,
    thrust_bounds=(0.0, 30.0),
    lift_coeff_bounds=(0.0, 2.5),
    roll_bounds=(-1.0, 1.0),
    stall_speed: float = 8.0,
    max_speed: float = 30.0,
    pitch_bounds=(-0.5, 0.5),
    objective_weight: float = 1.0,
    obstacle_set: str = "default",
    state_bounds: dict | None = None,
    rate_bounds: dict | None = None,
) -> ModeSpec:
    bounds = {"pitch": pitch_bounds}
    if state_bounds:
        bounds.update(state_bounds)
    rates = {"speed": (stall_speed, max_speed)}
    if rate_bounds:
        rates.update(rate_bounds)
    return ModeSpec(
        mode_id=mode_id,
        order=2,
        q_channels=("x", "y", "z", "pitch", "yaw"),
        g=make_airplane_g(mass, gravity, lift_gain, drag_base, drag_induced, rate_gain),
        kinematic_residual=make_airplane_alignment(),
        kinematic_dim=3,
        control_dim=3,
        control_bounds=np.array([thrust_bounds, lift_coeff_bounds, roll_bounds]),
        state_bounds=bounds,
        rate_bounds=rates,
        objective_weight=objective_weight,
        obstacle_set=obstacle_set,
    )


# ---------------------------------------------------------------------------
# Multicopter hover mode: pitch/roll attitude commands tilt the thrust vector;
# altitude and yaw are damped toward rest.


def make_hover_g(gravity: float = 9.81, z_damping: float = 2.0, yaw_damping: float = 2.0):
    def hover_g(q, qdot, u):
        pitch_cmd, roll_cmd = float(u[0]), float(u[1])
        yaw = q[3]
        c, s = math.cos(yaw), math.sin(yaw)
        return np.array(
            [
                gravity * (pitch_cmd * c + roll_cmd * s),
                gravity * (pitch_cmd * s - roll_cmd * c),
                -z_damping * qdot[2],
                -yaw_damping * qdot[3],
            ]
        )

    return hover_g


def make_hover_mode(
    mode_id: str = "hover",
    gravity: float = 9.81,
    z_damping: float = 2.0,
    yaw_damping: float = 2.0,
    tilt_bounds=(-0.4, 0.4),
    speed_limit: float = 5.0,
    objective_weight: float = 1.0,
    obstacle_set: str = "default",
    state_bounds: dict | None = None,
    rate_bounds: dict | None = None,
) -> ModeSpec:
    rates = {"speed_xy": (0.0, speed_limit)}
    if rate_bounds:
        rates.update(rate_bounds)
    return ModeSpec(
        mode_id=mode_id,
        order=2,
        q_channels=("x", "y", "z", "yaw"),
        g=make_hover_g(gravity, z_damping, yaw_damping),
        control_dim=2,
        control_bounds=np.array([tilt_bounds, tilt_bounds]),
        state_bounds=dict(state_bounds or {}),
        rate_bounds=rates,
        objective_weight=objective_weight,
        obstacle_set=obstacle_set,
    )


def make_servo_lag(command: np.ndarray, tau: float):
    """First-order control servo: du/dt = (command - u) / tau."""
    command = np.asarray(command, dtype=float)
    if tau <= 0:
        raise ConfigurationError("servo time constant must be positive")

    def servo(u):
        return (command - np.asarray(u)) / tau

    return servo


# ---------------------------------------------------------------------------
# Registry.

MODEL_FACTORIES = {
    "dubins": make_dubins_mode,
    "airplane": make_airplane_mode,
    "hover": make_hover_mode,
}


class ModeRegistry:
    """Read-only lookup from mode id to its immutable ModeSpec."""

    def __init__(self):
        self._modes: dict[str, ModeSpec] = {}

    def register(self, spec: ModeSpec):
        if spec.mode_id in self._modes:
            raise ConfigurationError(f"mode {spec.mode_id!r} already registered")
        self._modes[spec.mode_id] = spec

    def get(self, mode_id: str) -> ModeSpec:
        try:
            return self._modes[mode_id]
        except KeyError:
            raise ConfigurationError(f"unknown mode {mode_id!r}") from None

    def mode_ids(self) -> list[str]:
        return list(self._modes)

    def __contains__(self, mode_id: str) -> bool:
        return mode_id in self._modes


def builtin_registry() -> ModeRegistry:
    """Registry holding the three built-in modes with default constants."""
    registry = ModeRegistry()
    registry.register(make_dubins_mode())
    registry.register(make_airplane_mode())
    registry.register(make_hover_mode())
    return registry
