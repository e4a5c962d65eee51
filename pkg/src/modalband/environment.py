"""Obstacle maps built from geometric primitives with exact signed distances.

Each obstacle set is a named list of primitives; a mode references the set it
must avoid. Signed distance is negative inside an obstacle, and the distance
to a set is the minimum over its primitives. An empty set is infinitely far
away (large sentinel). Primitives evaluate batches of points at once, which
keeps roadmap construction cheap.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParameterError

EMPTY_SET_DISTANCE = 1e9


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - self.center, axis=-1) - self.radius


@dataclass
class Box:
    """Axis-aligned box given by ordered min/max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        q = np.abs(points - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside


@dataclass
class HalfSpace:
    """Points with normal . p < offset are inside the obstacle.

    A ground obstacle for flight is HalfSpace(normal=(0,0,1), offset=0):
    everything below z = 0 is inside.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.linalg.norm(self.normal)
        if n == 0.0:
            raise ParameterError("half-space normal must be nonzero")
        self.normal = np.asarray(self.normal, dtype=float) / n

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return points @ self.normal - self.offset


@dataclass
class Environment:
    sets: dict[str, list] = field(default_factory=dict)
    workspace_lo: np.ndarray = field(default_factory=lambda: np.full(3, -50.0))
    workspace_hi: np.ndarray = field(default_factory=lambda: np.full(3, 50.0))

    def __post_init__(self):
        for name, primitives in self.sets.items():
            for prim in primitives:
                if isinstance(prim, Sphere) and prim.radius <= 0:
                    raise ConfigurationError(f"set {name!r}: sphere radius must be positive")
                if isinstance(prim, Box) and np.any(np.asarray(prim.lo) >= np.asarray(prim.hi)):
                    raise ConfigurationError(f"set {name!r}: box corners must be ordered")

    def batch_signed_distance(self, points: np.ndarray, set_id: str) -> np.ndarray:
        if set_id not in self.sets:
            raise ConfigurationError(f"unknown obstacle set {set_id!r}")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        primitives = self.sets[set_id]
        if not primitives:
            return np.full(points.shape[0], EMPTY_SET_DISTANCE)
        return np.min([prim.signed_distance(points) for prim in primitives], axis=0)

    def signed_distance(self, p, set_id: str) -> float:
        return float(self.batch_signed_distance(p, set_id)[0])

    def union_distance(self, p, set_ids) -> float:
        """Minimum signed distance over several sets (for mode-agnostic queries)."""
        return min(
            (self.signed_distance(p, sid) for sid in set_ids), default=EMPTY_SET_DISTANCE
        )

    def segment_collision_free(self, p_a, p_b, set_id: str, margin: float = 0.0) -> bool:
        """Conservative sampled check that the whole segment keeps strict clearance."""
        return self._segment_clear(p_a, p_b, [set_id], margin)

    def segment_clear_of_union(self, p_a, p_b, set_ids, margin: float = 0.0) -> bool:
        return self._segment_clear(p_a, p_b, list(set_ids), margin)

    def _segment_clear(self, p_a, p_b, set_ids, margin: float) -> bool:
        if margin < 0:
            raise ParameterError("margin must be nonnegative")
        if not set_ids:
            return True
        p_a = np.asarray(p_a, dtype=float)
        p_b = np.asarray(p_b, dtype=float)
        spacing = 0.1 if margin == 0.0 else min(0.5 * margin, 0.1)
        length = float(np.linalg.norm(p_b - p_a))
        n_samples = max(2, int(math.ceil(length / spacing)) + 1)
        s = np.linspace(0.0, 1.0, n_samples)[:, None]
        points = (1.0 - s) * p_a + s * p_b
        for sid in set_ids:
            if np.any(self.batch_signed_distance(points, sid) <= margin):
                return False
        return True
