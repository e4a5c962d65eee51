"""Minimum-time trajectory optimization for vehicles with multi-modal dynamics.

The planner transcribes dynamics, bounds, obstacle, and transition
constraints into a sparse factor graph over pose, control, and time-delta
vertices, optimizes it with Levenberg-Marquardt, and discovers mode
sequences by resizing trajectory segments and pruning collapsed modes.
"""

from .dynamics import (
    ModeRegistry,
    ModeSpec,
    TransitionSpec,
    builtin_registry,
    make_airplane_mode,
    make_dubins_mode,
    make_hover_mode,
)
from .environment import Box, Environment, HalfSpace, Sphere
from .errors import (
    ConfigurationError,
    DivergenceError,
    InitializationError,
    PlanningError,
)
from .graph import FactorGraph, LmConfig, lm_optimize
from .initialization import PrmConfig, build_initial_trajectory, looping_mode_sequence, prm_initial_path
from .manifold import Pose, PoseIncrement, boxminus_pose, boxplus_pose, interp_control, interp_pose
from .penalties import PenaltyWeights
from .planner import (
    BoundaryState,
    PlannerConfig,
    PlanningProblem,
    PlanResult,
    plan,
    prune_modes,
    resize_teb,
)
from .trajectory import CompositeTrajectory, SegmentTEB, extract_trajectory

__version__ = "0.1.0"
