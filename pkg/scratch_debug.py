import numpy as np

from modalband.dynamics import ModeRegistry, make_dubins_mode
from modalband.environment import Environment
from modalband.graph import _apply_increment, _rollback, lm_step
from modalband.initialization import build_initial_trajectory
from modalband.manifold import Pose
from modalband.planner import BoundaryState, PlannerConfig, PlanningProblem, build_graph

registry = ModeRegistry()
registry.register(make_dubins_mode(obstacle_set="ground"))
env = Environment(sets={"ground": []})
problem = PlanningProblem(
    registry=registry,
    env=env,
    start=BoundaryState(Pose.from_planar(0, 0, 0), velocity=np.zeros(3)),
    goal=BoundaryState(Pose.from_planar(50, 0, 0), velocity=np.zeros(3)),
    sigma_init=["taxi"],
)
config = PlannerConfig(seed=1)
traj = build_initial_trajectory(
    [problem.start.pose, problem.goal.pose], ["taxi"], registry,
    d_min=config.d_min, d_max=config.d_max, dt_init=config.dt_init,
)
graph, layout = build_graph(traj, problem, config)
c0 = graph.evaluate_cost()
print("initial cost", c0)
system = graph.linearize()
print("H diag range", system.H.diagonal().min(), system.H.diagonal().max())
print("|b|", np.linalg.norm(system.b), "c", system.c)

for lam in (1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6):
    dx = lm_step(system, lam)
    predicted = system.c + 2 * system.b @ dx + dx @ (system.H @ dx)
    saved = _apply_increment(graph, system.offsets, dx)
    actual = graph.evaluate_cost()
    _rollback(graph, saved)
    print(f"lam {lam:8.0e}  |dx| {np.linalg.norm(dx):10.4f}  predicted {predicted:12.2f}  actual {actual:14.2f}")
