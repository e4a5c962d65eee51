"""Composite trajectory containers: single-mode elastic segments chained by
mode transitions, plus timed sample extraction.

A segment holds N poses, N controls, and N-1 elastic time deltas. Consecutive
segments always have distinct modes; the boundary poses of adjacent segments
are distinct graph entities pulled together by transition penalties.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .manifold import Pose, finite_diff, onesided_velocity


@dataclass
class SegmentTEB:
    mode_id: str
    poses: list
    controls: list
    dts: list

    @property
    def n_poses(self) -> int:
        return len(self.poses)

    def validate(self):
        if self.n_poses < 2:
            raise ConfigurationError(f"segment {self.mode_id!r} needs >= 2 poses")
        if len(self.controls) != self.n_poses:
            raise ConfigurationError("one control per pose required")
        if len(self.dts) != self.n_poses - 1:
            raise ConfigurationError("one time delta per interval required")

    def total_time(self) -> float:
        return float(sum(self.dts))

    def arc_length(self) -> float:
        return float(
            sum(
                np.linalg.norm(b.position - a.position)
                for a, b in zip(self.poses, self.poses[1:])
            )
        )

    def collapsed(self, d_min: float) -> bool:
        """True when only boundary poses remain and they nearly coincide."""
        gap = float(np.linalg.norm(self.poses[-1].position - self.poses[0].position))
        return self.n_poses <= 2 and gap < d_min

    def copy(self) -> "SegmentTEB":
        return SegmentTEB(
            self.mode_id,
            [p.copy() for p in self.poses],
            [u.copy() for u in self.controls],
            list(self.dts),
        )


@dataclass
class CompositeTrajectory:
    segments: list

    def validate(self):
        if not self.segments:
            raise ConfigurationError("trajectory has no segments")
        for seg in self.segments:
            seg.validate()
        for a, b in zip(self.segments, self.segments[1:]):
            if a.mode_id == b.mode_id:
                raise ConfigurationError(
                    f"adjacent segments share mode {a.mode_id!r}; they must be merged"
                )

    @property
    def mode_sequence(self) -> list[str]:
        return [seg.mode_id for seg in self.segments]

    @property
    def transition_pairs(self) -> list[tuple[str, str]]:
        return [
            (a.mode_id, b.mode_id) for a, b in zip(self.segments, self.segments[1:])
        ]

    def total_time(self) -> float:
        return float(sum(seg.total_time() for seg in self.segments))

    def n_poses(self) -> int:
        return sum(seg.n_poses for seg in self.segments)

    def copy(self) -> "CompositeTrajectory":
        return CompositeTrajectory([seg.copy() for seg in self.segments])


@dataclass
class TrajectorySample:
    t: float
    mode: str
    pose: Pose
    velocity: np.ndarray
    acceleration: np.ndarray
    control: np.ndarray


@dataclass
class TimedTrajectory:
    samples: list
    transition_times: list = field(default_factory=list)

    def positions(self) -> np.ndarray:
        return np.array([s.pose.position for s in self.samples])

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])


def _segment_velocities(seg: SegmentTEB):
    """World-frame velocity and acceleration per pose from finite differences."""
    positions = np.array([p.position for p in seg.poses])
    n = seg.n_poses
    vels = np.zeros((n, 3))
    accs = np.zeros((n, 3))
    if n == 2:
        vels[0] = vels[1] = (positions[1] - positions[0]) / seg.dts[0]
        return vels, accs
    for i in range(1, n - 1):
        window = positions[i - 1 : i + 2]
        dts = seg.dts[i - 1 : i + 1]
        vel, acc = finite_diff(window, dts, order=2)
        vels[i] = vel
        accs[i] = acc
    vels[0] = onesided_velocity(positions[:3], seg.dts[:2], at_start=True)
    vels[-1] = onesided_velocity(positions[-3:], seg.dts[-2:], at_start=False)
    accs[0] = accs[1]
    accs[-1] = accs[-2]
    return vels, accs


def extract_trajectory(traj: CompositeTrajectory) -> TimedTrajectory:
    """Timed samples with cumulative timestamps and per-sample mode ids.

    Mode boundaries are instantaneous: the tail sample of one segment and the
    head sample of the next share a timestamp, which is also reported in
    ``transition_times``.
    """
    samples = []
    transition_times = []
    t = 0.0
    for k, seg in enumerate(traj.segments):
        vels, accs = _segment_velocities(seg)
        t_local = t
        for i in range(seg.n_poses):
            samples.append(
                TrajectorySample(
                    t=t_local,
                    mode=seg.mode_id,
                    pose=seg.poses[i],
                    velocity=vels[i],
                    acceleration=accs[i],
                    control=np.asarray(seg.controls[i], dtype=float),
                )
            )
            if i < seg.n_poses - 1:
                t_local += seg.dts[i]
        t = t_local
        if k < len(traj.segments) - 1:
            transition_times.append(t)
    return TimedTrajectory(samples=samples, transition_times=transition_times)
