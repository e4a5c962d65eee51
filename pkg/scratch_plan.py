import time

import numpy as np

from modalband.dynamics import ModeRegistry, make_dubins_mode
from modalband.environment import Environment
from modalband.manifold import Pose
from modalband.penalties import PenaltyWeights
from modalband.planner import BoundaryState, PlannerConfig, PlanningProblem, plan

registry = ModeRegistry()
registry.register(make_dubins_mode(obstacle_set="ground"))
env = Environment(sets={"ground": []}, workspace_lo=np.array([-5.0, -10.0, 0.0]), workspace_hi=np.array([55.0, 10.0, 10.0]))

problem = PlanningProblem(
    registry=registry,
    env=env,
    start=BoundaryState(Pose.from_planar(0, 0, 0), velocity=np.zeros(3)),
    goal=BoundaryState(Pose.from_planar(50, 0, 0), velocity=np.zeros(3)),
    sigma_init=["taxi"],
)
config = PlannerConfig(seed=1)

t0 = time.perf_counter()
result = plan(problem, config)
elapsed = time.perf_counter() - t0

print(f"elapsed          {elapsed:.2f} s wall")
print(f"total time       {result.total_time:.3f} s  (oracle 10.0)")
print(f"mode sequence    {result.mode_sequence}")
print(f"poses            {result.trajectory.n_poses()}")
print("residual maxima ", {k: round(v, 5) for k, v in result.residual_maxima.items()})
for row in result.cost_trace[::5]:
    print(row)
a = np.array([s.control[0] for s in result.timed.samples])
print("accel profile   ", np.round(a, 2))
