"""Sparse factor hypergraph over pose/control/time-delta vertices, and a
Levenberg-Marquardt optimizer for it.

Vertices hold optimizable values; edges hold weighted residual functions over
subsets of vertices. The total cost is sum over edges of weight * ||e||^2.
Each iteration linearizes the residuals with central numeric differences,
solves the damped normal equations (H + lambda*I) dx = -b with a sparse
factorization, and applies the increment through each vertex's boxplus.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import EvaluationError, LinearSolveError
from .manifold import DT_FLOOR, Pose, PoseIncrement, boxplus_pose

POSE = "pose"
CONTROL = "control"
TIMEDELTA = "timedelta"

_DIFF_STEP = 1e-6


@dataclass
class Vertex:
    id: int
    kind: str
    value: object  # Pose | np.ndarray | float
    fixed: bool = False

    @property
    def dim(self) -> int:
        """Dimension of the local increment space (6 for poses, never 7)."""
        if self.kind == POSE:
            return 6
        if self.kind == CONTROL:
            return len(self.value)
        return 1

    def boxplus(self, dx: np.ndarray):
        """Value after applying increment dx; the time-delta floor is enforced here."""
        if self.kind == POSE:
            return boxplus_pose(self.value, PoseIncrement(dx[:3], dx[3:]))
        if self.kind == CONTROL:
            return self.value + dx
        return max(self.value + float(dx[0]), DT_FLOOR)

    def copy_value(self):
        if self.kind == POSE:
            return self.value.copy()
        if self.kind == CONTROL:
            return self.value.copy()
        return self.value

    def diff_scales(self) -> np.ndarray:
        """Per-dimension numeric differentiation steps scaled by value magnitude."""
        if self.kind == POSE:
            mags = np.ones(6)
            mags[:3] = np.maximum(1.0, np.abs(self.value.position))
        elif self.kind == CONTROL:
            mags = np.maximum(1.0, np.abs(self.value))
        else:
            mags = np.array([max(1.0, abs(self.value))])
        return _DIFF_STEP * mags


@dataclass
class Edge:
    id: int
    vertex_ids: list[int]
    residual: object  # callable(*vertex values) -> np.ndarray
    weight: float
    dim: int
    tag: str = ""


@dataclass
class SparseSystem:
    """Quadratic model of the cost: c + 2 b^T dx + dx^T H dx."""

    H: sp.csr_matrix
    b: np.ndarray
    c: float
    offsets: dict  # vertex id -> (column offset, local dim), free vertices only

    @property
    def dim(self) -> int:
        return self.b.shape[0]


@dataclass
class LmConfig:
    lambda_init: float = 1e-4
    lambda_up: float = 10.0
    lambda_down: float = 0.5
    max_inner_iterations: int = 10
    cost_tolerance: float = 1e-8

    def __post_init__(self):
        if not (self.lambda_up > 1.0 > self.lambda_down > 0.0):
            raise ValueError("require lambda_up > 1 > lambda_down > 0")


@dataclass
class OptimizationReport:
    initial_cost: float
    final_cost: float
    iterations: int = 0
    accepted: int = 0
    rejected: int = 0
    converged: bool = False
    final_lambda: float = 0.0
    lambda_history: list[float] = field(default_factory=list)
    cost_history: list[float] = field(default_factory=list)  # accepted costs, non-increasing


class FactorGraph:
    def __init__(self):
        self.vertices: dict[int, Vertex] = {}
        self.edges: list[Edge] = []
        self._next_vertex = 0
        self._next_edge = 0
        self._index_cache: dict[int, tuple] = {}  # edge id -> (rows, cols); offsets are stable

    def add_vertex(self, kind: str, value, fixed: bool = False) -> int:
        vid = self._next_vertex
        self._next_vertex += 1
        if kind == CONTROL:
            value = np.asarray(value, dtype=float)
        elif kind == TIMEDELTA:
            value = float(value)
        self.vertices[vid] = Vertex(vid, kind, value, fixed)
        return vid

    def add_edge(self, vertex_ids: list[int], residual, weight: float, dim: int, tag: str = "") -> int:
        for vid in vertex_ids:
            if vid not in self.vertices:
                raise KeyError(f"edge references unknown vertex {vid}")
        if dim <= 0:
            raise ValueError("residual dimension must be positive")
        eid = self._next_edge
        self._next_edge += 1
        self.edges.append(Edge(eid, list(vertex_ids), residual, float(weight), dim, tag))
        return eid

    def values_of(self, edge: Edge) -> list:
        return [self.vertices[vid].value for vid in edge.vertex_ids]

    # -- cost ---------------------------------------------------------------

    def edge_residual(self, edge: Edge) -> np.ndarray:
        e = np.asarray(edge.residual(*self.values_of(edge)), dtype=float)
        if e.shape != (edge.dim,):
            raise EvaluationError(
                f"edge {edge.id} ({edge.tag}) returned shape {e.shape}, expected ({edge.dim},)",
                edge.id,
            )
        return e

    def evaluate_cost(self) -> float:
        total = 0.0
        for edge in self.edges:
            e = self.edge_residual(edge)
            if not np.all(np.isfinite(e)):
                raise EvaluationError(
                    f"edge {edge.id} ({edge.tag}) produced a non-finite residual", edge.id
                )
            total += edge.weight * float(e @ e)
        return total

    # -- linearization ------------------------------------------------------

    def free_offsets(self) -> dict:
        offsets = {}
        col = 0
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            if v.fixed:
                continue
            offsets[vid] = (col, v.dim)
            col += v.dim
        return offsets

    def _edge_jacobians(self, edge: Edge, e0: np.ndarray) -> dict:
        """Central-difference Jacobian blocks keyed by free vertex id."""
        values = self.values_of(edge)
        residual = edge.residual
        blocks = {}
        for slot, vid in enumerate(edge.vertex_ids):
            vertex = self.vertices[vid]
            if vertex.fixed:
                continue
            dim = vertex.dim
            J = np.empty((edge.dim, dim))
            steps = vertex.diff_scales()
            dx = np.zeros(dim)
            for k in range(dim):
                h = steps[k]
                dx[k] = h
                values[slot] = vertex.boxplus(dx)
                e_plus = residual(*values)
                dx[k] = -h
                values[slot] = vertex.boxplus(dx)
                e_minus = residual(*values)
                dx[k] = 0.0
                J[:, k] = (e_plus - e_minus) / (2.0 * h)
            values[slot] = vertex.value
            if not np.isfinite(J).all():
                raise EvaluationError(
                    f"edge {edge.id} ({edge.tag}) produced a non-finite Jacobian", edge.id
                )
            if vid in blocks:
                blocks[vid] = blocks[vid] + J
            else:
                blocks[vid] = J
        return blocks

    def linearize(self) -> SparseSystem:
        """Build H = sum w J^T J, b = sum w J^T e, c = current cost."""
        offsets = self.free_offsets()
        n = sum(dim for _, dim in offsets.values())
        b = np.zeros(n)
        c = 0.0
        rows, cols, vals = [], [], []

        for edge in self.edges:
            e0 = self.edge_residual(edge)
            if not np.all(np.isfinite(e0)):
                raise EvaluationError(
                    f"edge {edge.id} ({edge.tag}) produced a non-finite residual", edge.id
                )
            c += edge.weight * float(e0 @ e0)
            blocks = self._edge_jacobians(edge, e0)
            block_vals = []
            for vid_a, J_a in blocks.items():
                off_a, dim_a = offsets[vid_a]
                b[off_a : off_a + dim_a] += edge.weight * (J_a.T @ e0)
                for J_b in blocks.values():
                    block_vals.append((edge.weight * (J_a.T @ J_b)).ravel())
            cached = self._index_cache.get(edge.id)
            if cached is None:
                edge_rows, edge_cols = [], []
                for vid_a in blocks:
                    off_a, dim_a = offsets[vid_a]
                    idx_a = np.arange(off_a, off_a + dim_a)
                    for vid_b in blocks:
                        off_b, dim_b = offsets[vid_b]
                        edge_rows.append(np.repeat(idx_a, dim_b))
                        edge_cols.append(np.tile(np.arange(off_b, off_b + dim_b), dim_a))
                cached = (np.concatenate(edge_rows), np.concatenate(edge_cols)) if edge_rows else (np.empty(0, dtype=int),) * 2
                self._index_cache[edge.id] = cached
            if block_vals:
                rows.append(cached[0])
                cols.append(cached[1])
                vals.append(np.concatenate(block_vals))

        if rows:
            H = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n, n),
            ).tocsr()
        else:
            H = sp.csr_matrix((n, n))
        return SparseSystem(H=H, b=b, c=c, offsets=offsets)


def lm_step(system: SparseSystem, lam: float) -> np.ndarray:
    """Solve (H + lambda I) dx = -b with a sparse factorization.

    Raises LinearSolveError when the damped system cannot be factorized or
    yields a non-finite solution; the caller should raise lambda and retry.
    """
    n = system.dim
    if n == 0:
        return np.zeros(0)
    A = (system.H + lam * sp.identity(n, format="csr")).tocsc()
    try:
        dx = splu(A).solve(-system.b)
    except RuntimeError as exc:
        raise LinearSolveError(f"factorization failed at lambda={lam}: {exc}") from exc
    if not np.all(np.isfinite(dx)):
        raise LinearSolveError(f"non-finite increment at lambda={lam}")
    return dx


def _apply_increment(graph: FactorGraph, offsets: dict, dx: np.ndarray) -> dict:
    saved = {}
    for vid, (off, dim) in offsets.items():
        vertex = graph.vertices[vid]
        saved[vid] = vertex.copy_value()
        vertex.value = vertex.boxplus(dx[off : off + dim])
    return saved


def _rollback(graph: FactorGraph, saved: dict):
    for vid, value in saved.items():
        graph.vertices[vid].value = value


def lm_optimize(graph: FactorGraph, config: LmConfig, diagnostics: list | None = None) -> OptimizationReport:
    """Run damped Gauss-Newton iterations until convergence or iteration cap.

    A step is accepted only if the total cost strictly decreases; otherwise it
    is rolled back exactly and the damping is increased. When ``diagnostics``
    is a list, one (iteration, cost, lambda, accepted) row is appended per step.
    """
    cost = graph.evaluate_cost()
    report = OptimizationReport(
        initial_cost=cost, final_cost=cost, final_lambda=config.lambda_init
    )
    report.cost_history.append(cost)
    if not any(not v.fixed for v in graph.vertices.values()):
        report.converged = True
        return report

    lam = config.lambda_init
    system = None
    for it in range(config.max_inner_iterations):
        if system is None:
            system = graph.linearize()
        try:
            dx = lm_step(system, lam)
        except LinearSolveError:
            lam *= config.lambda_up
            report.iterations += 1
            report.rejected += 1
            report.lambda_history.append(lam)
            continue
        if float(np.max(np.abs(dx), initial=0.0)) < 1e-15:
            report.converged = True
            break
        saved = _apply_increment(graph, system.offsets, dx)
        new_cost = graph.evaluate_cost()
        report.iterations += 1
        accepted = math.isfinite(new_cost) and new_cost < cost
        if accepted:
            rel_change = (cost - new_cost) / max(cost, 1e-300)
            cost = new_cost
            report.accepted += 1
            report.cost_history.append(cost)
            lam *= config.lambda_down
            system = None
        else:
            _rollback(graph, saved)
            report.rejected += 1
            lam *= config.lambda_up
        report.lambda_history.append(lam)
        if diagnostics is not None:
            diagnostics.append((it, cost, lam, accepted))
        if accepted and rel_change < config.cost_tolerance:
            report.converged = True
            break

    report.final_cost = cost
    report.final_lambda = lam
    return report
