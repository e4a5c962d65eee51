"""Exception hierarchy shared across the planner."""


class PlanningError(Exception):
    """Base class for all planner errors."""


class ParameterError(PlanningError):
    """An argument violates a documented precondition."""


class InvalidIncrementError(PlanningError):
    """A manifold increment is malformed (non-finite or wrong shape)."""


class DegenerateTimestepError(PlanningError):
    """A time delta is zero or negative where a positive one is required."""


class EvaluationError(PlanningError):
    """A residual or Jacobian evaluated to a non-finite value."""

    def __init__(self, message: str, edge_id: int | None = None):
        super().__init__(message)
        self.edge_id = edge_id


class LinearSolveError(PlanningError):
    """The damped normal equations could not be factorized; caller should raise lambda."""


class ConfigurationError(PlanningError):
    """Unknown mode, obstacle set, transition pair, or invalid scenario field."""


class InitializationError(PlanningError):
    """No collision-free initial path was found within the sampling budget."""


class DivergenceError(PlanningError):
    """Optimization produced a non-finite cost."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
