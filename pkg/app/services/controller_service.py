"""
Receding-horizon controller for CAVs

The decision vector is u = (u_0, ..., u_{H-1}). Under forward-Euler dynamics the speed and position
at every horizon step are affine in u:

    v_h = v_0 + Sv[h] @ u            Sv[h, k] = T           for k < h
    x_h = x_0 + h T v_0 + Sx[h] @ u  Sx[h, m] = T^2 (h-m-1)  for m < h - 1

so every CBF condition below is a linear row a @ u >= lower. Terms that are not linear in the state
(curvature along the path, the lateral b-value and the CLBF power term) are frozen on a nominal
trajectory: the previous plan shifted one step, or constant velocity on a cold start.
"""
from __future__ import annotations

import logging
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from types import MappingProxyType
from typing import Dict, List, Optional, Tuple

import numpy as np
import osqp
from scipy import sparse

from app.schemas.controller import CbfParams, ControllerConfig
from app.schemas.vehicle import VehicleLimits
from app.services.geometry_service import RoundaboutLayout, RouteSpec
from app.services.sequencing_service import (
    Assignment,
    MergingGroup,
    Sequence,
    SequenceEvaluation,
)
from app.services.vehicle_service import STOPPED_SPEED, VehicleState, WorldSnapshot

logger = logging.getLogger(__name__)

SOLVER_EPS = 1e-8
GUARD_MARGIN = 1e-3
MAX_ITER = 20000


QP_INFINITY = 1e30
SOLVER_SETTINGS = dict(
    eps_abs=SOLVER_EPS,
    eps_rel=SOLVER_EPS,
    max_iter=MAX_ITER,
    polishing=True,
    warm_starting=False,
    verbose=False,
)


class QpWorkspaces:
    """OSQP solvers keyed by sparsity pattern; a repeated pattern only has its numbers swapped in"""

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self.hits = 0
        self.misses = 0
        self._solvers: "OrderedDict[tuple, osqp.OSQP]" = OrderedDict()

    @staticmethod
    def pattern(P: sparse.csc_matrix, A: sparse.csc_matrix) -> tuple:
        return (P.shape, A.shape, P.indptr.tobytes(), P.indices.tobytes(), A.indptr.tobytes(), A.indices.tobytes())

    def solve(self, P: sparse.csc_matrix, q: np.ndarray, A: sparse.csc_matrix, l: np.ndarray, u: np.ndarray):
        key = self.pattern(P, A)
        solver = self._solvers.get(key)
        if solver is None:
            self.misses += 1
            solver = osqp.OSQP()
            solver.setup(P=P, q=q, A=A, l=l, u=u, **SOLVER_SETTINGS)
            self._solvers[key] = solver
            if len(self._solvers) > self.capacity:
                self._solvers.popitem(last=False)
        else:
            self.hits += 1
            self._solvers.move_to_end(key)
            solver.update(q=q, l=l, u=u, Px=P.data, Ax=A.data)
        return solver.solve()

    def clear(self) -> None:
        self._solvers.clear()


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    FALLBACK = "fallback"


class NeighborRole(str, Enum):
    PREDECESSOR = "predecessor"
    MERGING = "merging-conflict"


@dataclass(frozen=True, eq=False)
class NeighborPrediction:
    """Predicted neighbor states at steps 0..H; index 0 is the current state"""
    vehicle_id: int
    role: NeighborRole
    segment: int
    segment_length: float
    displacement: np.ndarray
    v: np.ndarray
    x0: float
    from_plan: bool = False

    @property
    def x(self) -> np.ndarray:
        """Positions in the neighbor's current segment; merging conflicts stop at the MP"""
        x = self.x0 + self.displacement
        if self.role == NeighborRole.MERGING:
            return np.minimum(x, self.segment_length)
        return x

    def arrival_step(self) -> Optional[int]:
        """First step at which the neighbor reaches the end of its segment, if inside the prediction"""
        reached = np.nonzero(self.x0 + self.displacement >= self.segment_length - 1e-9)[0]
        return int(reached[0]) if reached.size else None


@dataclass(frozen=True, eq=False)
class ConstraintRow:
    """coeffs @ u >= lower"""
    name: str
    step: int
    coeffs: np.ndarray
    lower: float

    def slack(self, u: np.ndarray) -> float:
        return float(self.coeffs @ u - self.lower)


@dataclass(frozen=True, eq=False)
class VehiclePlan:
    """A solved horizon stored in route distance so it can be replayed by neighbors"""
    vehicle_id: int
    start_step: int
    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    status: SolveStatus

    def offset(self, step: int) -> int:
        return step - self.start_step

    def control_at(self, step: int) -> Optional[float]:
        k = self.offset(step)
        if 0 <= k < len(self.u):
            return float(self.u[k])
        return None


@lru_cache(maxsize=32)
def horizon_matrices(horizon: int, time_step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sv and Sx of shape (H+1, H); cached and read-only"""
    steps = np.arange(horizon + 1)[:, None]
    cols = np.arange(horizon)[None, :]
    sv = np.where(cols < steps, time_step, 0.0)
    sx = time_step ** 2 * np.maximum(0, steps - cols - 1).astype(float)
    sv.flags.writeable = False
    sx.flags.writeable = False
    return sv, sx


@dataclass(frozen=True, eq=False)
class HorizonContext:
    """Everything a CAV's constraint rows are built from"""
    vehicle_id: int
    horizon: int
    time_step: float
    x0: float
    v0: float
    d0: float
    route: RouteSpec
    limits: VehicleLimits
    cbf: CbfParams
    nominal_v: np.ndarray
    nominal_d: np.ndarray
    kappa: np.ndarray
    sv: np.ndarray
    sx: np.ndarray

    @classmethod
    def build(
        cls,
        state: VehicleState,
        layout: RoundaboutLayout,
        limits: VehicleLimits,
        config: ControllerConfig,
        previous: Optional[VehiclePlan] = None,
        step: int = 0,
    ) -> "HorizonContext":
        horizon, dt = config.horizon, config.time_step
        nominal_v, nominal_d = nominal_trajectory(state, horizon, dt, previous, step)
        total = state.route.total_length
        kappa = np.array([layout.curvature_at(state.route, min(max(d, 0.0), total)) for d in nominal_d])
        sv, sx = horizon_matrices(horizon, dt)
        return cls(
            vehicle_id=state.id,
            horizon=horizon,
            time_step=dt,
            x0=state.x,
            v0=state.v,
            d0=state.d,
            route=state.route,
            limits=limits,
            cbf=config.cbf,
            nominal_v=nominal_v,
            nominal_d=nominal_d,
            kappa=kappa,
            sv=sv,
            sx=sx,
        )

    @property
    def nominal_x(self) -> np.ndarray:
        return self.x0 + (self.nominal_d - self.d0)

    def unit(self, h: int) -> np.ndarray:
        e = np.zeros(self.horizon)
        e[h] = 1.0
        return e

    def position_constant(self, h: int) -> float:
        return self.x0 + h * self.time_step * self.v0


def nominal_trajectory(
    state: VehicleState,
    horizon: int,
    time_step: float,
    previous: Optional[VehiclePlan],
    step: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Speeds and route distances at steps 0..H"""
    v = np.full(horizon + 1, state.v)
    d = state.d + time_step * state.v * np.arange(horizon + 1)
    if previous is None:
        return v, d
    k = previous.offset(step)
    if k < 0 or k >= len(previous.v):
        return v, d
    tail_v = previous.v[k:]
    tail_d = previous.d[k:] - previous.d[k] + state.d
    n = min(len(tail_v), horizon + 1)
    v[:n] = tail_v[:n]
    d[:n] = tail_d[:n]
    for h in range(n, horizon + 1):
        d[h] = d[h - 1] + time_step * v[h - 1]
        v[h] = v[h - 1]
    return v, d


def predict_neighbor(
    vehicle: VehicleState,
    horizon: int,
    world: WorldSnapshot,
    time_step: float,
    role: NeighborRole = NeighborRole.PREDECESSOR,
    limits: Optional[VehicleLimits] = None,
) -> NeighborPrediction:
    """Replay a stored CAV plan when one covers this step, else roll out constant velocity"""
    plan = world.plans.get(vehicle.id) if vehicle.is_cav else None
    v = np.full(horizon + 1, vehicle.v)
    displacement = time_step * vehicle.v * np.arange(horizon + 1)
    from_plan = False
    if plan is not None and 0 <= plan.offset(world.step) < len(plan.v):
        k = plan.offset(world.step)
        tail_v = plan.v[k:]
        tail_d = plan.d[k:] - plan.d[k]
        n = min(len(tail_v), horizon + 1)
        v[:n] = tail_v[:n]
        displacement[:n] = tail_d[:n]
        for h in range(n, horizon + 1):
            displacement[h] = displacement[h - 1] + time_step * v[h - 1]
            v[h] = v[h - 1]
        from_plan = True
    if limits is not None:
        v = np.clip(v, limits.v_min, limits.v_max)
    return NeighborPrediction(
        vehicle_id=vehicle.id,
        role=role,
        segment=vehicle.segment,
        segment_length=world.layout.segment_length(vehicle.segment),
        displacement=displacement,
        v=v,
        x0=vehicle.x,
        from_plan=from_plan,
    )


def build_speed_cbfs(ctx: HorizonContext) -> List[ConstraintRow]:
    """-u + k1 (v_max - v) >= 0 and u + k2 (v - v_min) >= 0 at every step"""
    k1, k2 = ctx.cbf.k1, ctx.cbf.k2
    rows: List[ConstraintRow] = []
    for h in range(ctx.horizon):
        e, sv = ctx.unit(h), ctx.sv[h]
        rows.append(ConstraintRow("speed-max", h, -e - k1 * sv, -k1 * (ctx.limits.v_max - ctx.v0)))
        rows.append(ConstraintRow("speed-min", h, e + k2 * sv, -k2 * (ctx.v0 - ctx.limits.v_min)))
    return rows


def build_rear_end_cbf(ctx: HorizonContext, pred: Optional[NeighborPrediction], gap0: Optional[float]) -> List[ConstraintRow]:
    """v_ip - v - phi u + k3 (z - phi v - delta) >= 0 with z tracked from the current gap"""
    if pred is None or gap0 is None:
        return []
    phi, delta, k3 = ctx.limits.phi, ctx.limits.delta, ctx.cbf.k3
    rows: List[ConstraintRow] = []
    for h in range(ctx.horizon):
        sv, sx = ctx.sv[h], ctx.sx[h]
        coeffs = -sv - phi * ctx.unit(h) - k3 * sx - k3 * phi * sv
        z_const = gap0 + pred.displacement[h] - h * ctx.time_step * ctx.v0
        const = pred.v[h] - ctx.v0 + k3 * (z_const - phi * ctx.v0 - delta)
        rows.append(ConstraintRow("rear-end", h, coeffs, -const))
    return rows


def merging_barrier(
    gap: float,
    x_im: float,
    length_im: float,
    v_i: float,
    phi: float,
    delta: float,
) -> float:
    """b4 = z_{i,i_m} - (phi / L_im) x_im v_i - delta"""
    return gap - phi / length_im * x_im * v_i - delta


def build_merging_clbf(
    ctx: HorizonContext,
    conflict: Optional[NeighborPrediction],
    gap0: Optional[float],
    guard: bool = True,
) -> List[ConstraintRow]:
    """CLBF rows until the conflicting vehicle reaches the MP, plus the hard b4 >= 0 guard row.

    z is tracked from the current merging gap gap0 like the rear-end rows track theirs.
    """
    if conflict is None or gap0 is None or conflict.x0 >= conflict.segment_length:
        return []
    phi, delta = ctx.limits.phi, ctx.limits.delta
    p, q = ctx.cbf.p, ctx.cbf.q
    L_im = conflict.segment_length
    x_im, v_im = conflict.x, conflict.v
    ratio = phi / L_im
    arrival = conflict.arrival_step()
    if conflict.v[0] < STOPPED_SPEED:
        arrival = None
    active = ctx.horizon if arrival is None else min(arrival, ctx.horizon)

    nominal_x = ctx.nominal_x
    rows: List[ConstraintRow] = []
    for h in range(active):
        gap = gap0 - (nominal_x[h] - ctx.x0) + (x_im[h] - x_im[0])
        b4 = merging_barrier(gap, x_im[h], L_im, ctx.nominal_v[h], phi, delta)
        power = p * math.copysign(abs(b4) ** q, b4) if b4 != 0 else 0.0
        coeffs = -ctx.sv[h] - ratio * x_im[h] * ctx.unit(h) - ratio * v_im[h] * ctx.sv[h]
        const = v_im[h] - ctx.v0 - ratio * v_im[h] * ctx.v0 + power
        rows.append(ConstraintRow("merging-clbf", h, coeffs, -const))

    if guard and arrival is not None and 1 <= arrival - 1 <= ctx.horizon:
        g = arrival - 1
        coeffs = -ctx.sx[g] - ratio * x_im[g] * ctx.sv[g]
        gap = gap0 - (ctx.position_constant(g) - ctx.x0) + (x_im[g] - x_im[0])
        const = gap - ratio * x_im[g] * ctx.v0 - delta
        rows.append(ConstraintRow("merging-guard", g, coeffs, GUARD_MARGIN - const))
    return rows


def build_lateral_cbf(ctx: HorizonContext) -> List[ConstraintRow]:
    """-2 kappa h v u + k5 (w g - kappa v^2 h) >= 0 on the nominal speed; no rows where kappa is 0"""
    limits, k5 = ctx.limits, ctx.cbf.k5
    rows: List[ConstraintRow] = []
    for h in range(ctx.horizon):
        kappa = ctx.kappa[h]
        if kappa == 0.0:
            continue
        v = ctx.nominal_v[h]
        b5 = limits.half_width * limits.gravity - kappa * v ** 2 * limits.height
        coeffs = -2.0 * kappa * limits.height * v * ctx.unit(h)
        rows.append(ConstraintRow("lateral", h, coeffs, -k5 * b5))
    return rows


@dataclass(frozen=True, eq=False)
class MpcProblem:
    horizon: int
    time_step: float
    x0: float
    v0: float
    limits: VehicleLimits
    lambda_speed: float
    lambda_comfort: float
    desired_speed: float
    kappa: np.ndarray
    kappa_max: float
    rows: Tuple[ConstraintRow, ...] = ()
    tolerance: float = 1e-6
    k2: float = 1.0

    def trajectory(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        sv, sx = horizon_matrices(self.horizon, self.time_step)
        steps = np.arange(self.horizon + 1)
        v = self.v0 + sv @ u
        x = self.x0 + steps * self.time_step * self.v0 + sx @ u
        return v, x

    def objective(self, u: np.ndarray) -> float:
        """Sum over steps of the three normalized terms, speeds taken after each control"""
        v, _ = self.trajectory(u)
        terms = objective_terms(u, v[1:], self.kappa, self.limits, self.lambda_speed,
                                self.lambda_comfort, self.desired_speed, self.kappa_max)
        return float(sum(t.sum() for t in terms))


def objective_terms(
    u: np.ndarray,
    v: np.ndarray,
    kappa: np.ndarray,
    limits: VehicleLimits,
    lambda_speed: float,
    lambda_comfort: float,
    desired_speed: float,
    kappa_max: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    control = u ** 2 / limits.u_scale
    speed = lambda_speed * (v - desired_speed) ** 2 / (limits.v_max - limits.v_min) ** 2
    comfort = lambda_comfort * np.asarray(kappa) * v ** 2 / (kappa_max * limits.v_max ** 2)
    return control, speed, comfort


@dataclass(frozen=True, eq=False)
class MpcSolution:
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    objective: float
    status: SolveStatus
    solve_time: float = 0.0
    iterations: int = 0
    num_rows: int = 0
    binding: Tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        return self.status == SolveStatus.OPTIMAL

    @property
    def first_control(self) -> float:
        return float(self.u[0])


def fallback_controls(v0: float, horizon: int, time_step: float, limits: VehicleLimits, k2: float) -> np.ndarray:
    """Maximal braking that still respects the box bounds and the minimum-speed conditions"""
    u = np.empty(horizon)
    v = v0
    for h in range(horizon):
        u[h] = max(limits.u_min, -k2 * (v - limits.v_min), (limits.v_min - v) / time_step)
        u[h] = min(u[h], limits.u_max)
        v = v + time_step * u[h]
    return u


def fallback_solution(problem: MpcProblem, status: SolveStatus, started: float, iterations: int = 0) -> MpcSolution:
    u = fallback_controls(problem.v0, problem.horizon, problem.time_step, problem.limits, problem.k2)
    v, x = problem.trajectory(u)
    return MpcSolution(
        u=u,
        v=v,
        x=x,
        objective=problem.objective(u),
        status=status,
        solve_time=time.perf_counter() - started,
        iterations=iterations,
        num_rows=len(problem.rows),
    )


def assemble_and_solve(problem: MpcProblem, workspaces: Optional[QpWorkspaces] = None) -> MpcSolution:
    """Convex QP over u in [u_min, u_max]^H; answers are re-checked against every row"""
    started = time.perf_counter()
    H, limits = problem.horizon, problem.limits
    sv, _ = horizon_matrices(H, problem.time_step)
    A_next = sv[1:]
    base = np.full(H, problem.v0)
    kappa = np.asarray(problem.kappa, dtype=float)

    w_speed = problem.lambda_speed / (limits.v_max - limits.v_min) ** 2
    w_comfort = problem.lambda_comfort * kappa / (problem.kappa_max * limits.v_max ** 2)
    diag = w_speed + w_comfort
    P = 2.0 * (np.eye(H) / limits.u_scale + A_next.T @ (diag[:, None] * A_next))
    q = 2.0 * A_next.T @ (w_speed * (base - problem.desired_speed) + w_comfort * base)

    A_rows = [np.eye(H), A_next]
    lower = [np.full(H, limits.u_min), np.full(H, limits.v_min - problem.v0)]
    upper = [np.full(H, limits.u_max), np.full(H, limits.v_max - problem.v0)]
    if problem.rows:
        A_rows.append(np.vstack([row.coeffs for row in problem.rows]))
        lower.append(np.array([row.lower for row in problem.rows]))
        upper.append(np.full(len(problem.rows), QP_INFINITY))

    P_csc = sparse.triu(sparse.csc_matrix(P), format="csc")
    A_csc = sparse.csc_matrix(np.vstack(A_rows))
    lo, hi = np.concatenate(lower), np.concatenate(upper)
    if workspaces is None:
        solver = osqp.OSQP()
        solver.setup(P=P_csc, q=q, A=A_csc, l=lo, u=hi, **SOLVER_SETTINGS)
        result = solver.solve()
    else:
        result = workspaces.solve(P_csc, q, A_csc, lo, hi)
    iterations = int(getattr(result.info, "iter", 0))
    status = str(result.info.status).lower()

    if not status.startswith("solved") or result.x is None or not np.all(np.isfinite(result.x)):
        logger.debug("QP not solved (%s) after %d iterations", status, iterations)
        return fallback_solution(problem, SolveStatus.INFEASIBLE, started, iterations)

    u = np.clip(np.asarray(result.x, dtype=float), limits.u_min, limits.u_max)
    v, x = problem.trajectory(u)
    violated = _violations(problem, u, v)
    if violated:
        logger.debug("QP answer violates %s; treating as infeasible", ", ".join(sorted(set(violated))))
        return fallback_solution(problem, SolveStatus.INFEASIBLE, started, iterations)

    binding = tuple(sorted({row.name for row in problem.rows if row.slack(u) <= problem.tolerance}))
    return MpcSolution(
        u=u,
        v=v,
        x=x,
        objective=problem.objective(u),
        status=SolveStatus.OPTIMAL,
        solve_time=time.perf_counter() - started,
        iterations=iterations,
        num_rows=len(problem.rows),
        binding=binding,
    )


def _violations(problem: MpcProblem, u: np.ndarray, v: np.ndarray) -> List[str]:
    tol = problem.tolerance
    limits = problem.limits
    names = [row.name for row in problem.rows
             if row.slack(u) < -tol * max(1.0, float(np.linalg.norm(row.coeffs)))]
    if np.any(v[1:] < limits.v_min - tol) or np.any(v[1:] > limits.v_max + tol):
        names.append("speed-box")
    return names


class MpcController:
    """Builds and solves the per-CAV horizon problem and scores merging sequences"""

    def __init__(self, layout: RoundaboutLayout, limits: VehicleLimits, config: ControllerConfig):
        self.layout = layout
        self.limits = limits
        self.config = config
        self.workspaces = QpWorkspaces()

    def problem_for(self, ctx: HorizonContext, rows: List[ConstraintRow]) -> MpcProblem:
        return MpcProblem(
            horizon=ctx.horizon,
            time_step=ctx.time_step,
            x0=ctx.x0,
            v0=ctx.v0,
            limits=self.limits,
            lambda_speed=self.config.lambda_speed,
            lambda_comfort=self.config.lambda_comfort,
            desired_speed=self.config.desired_speed,
            kappa=ctx.kappa[1:],
            kappa_max=self.layout.kappa_max,
            rows=tuple(rows),
            tolerance=self.config.solver_tolerance,
            k2=self.config.cbf.k2,
        )

    def neighbor_rows(self, state: VehicleState, assignment: Assignment, world: WorldSnapshot):
        """Predictions and current gaps for i_p and i_m when they are still relevant"""
        H, dt = self.config.horizon, self.config.time_step
        pred, gap_ip, conflict, gap_im = None, None, None, None
        ip = world.vehicles.get(assignment.ip) if assignment.ip is not None else None
        if ip is not None:
            gap_ip = self.layout.forward_gap(state, ip)
            if gap_ip is not None:
                pred = predict_neighbor(ip, H, world, dt, NeighborRole.PREDECESSOR, self.limits)
        im = world.vehicles.get(assignment.im) if assignment.im is not None else None
        if im is not None and im.cz == state.cz and im.segment != state.segment:
            gap_im = self.layout.gap_to_merging_conflict(state, im)
            conflict = predict_neighbor(im, H, world, dt, NeighborRole.MERGING, self.limits)
        return pred, gap_ip, conflict, gap_im

    def build_rows(self, ctx, state, assignment, world) -> List[ConstraintRow]:
        pred, gap_ip, conflict, gap_im = self.neighbor_rows(state, assignment, world)
        rows = build_speed_cbfs(ctx)
        rows += build_rear_end_cbf(ctx, pred, gap_ip)
        rows += build_merging_clbf(ctx, conflict, gap_im, guard=self.config.merge_arrival_guard)
        rows += build_lateral_cbf(ctx)
        return rows

    def plan(self, state: VehicleState, assignment: Assignment, world: WorldSnapshot) -> MpcSolution:
        """Solve the horizon problem for one CAV; refinement re-freezes on the last answer"""
        previous = world.plans.get(state.id)
        ctx = HorizonContext.build(state, self.layout, self.limits, self.config, previous, world.step)
        rows = self.build_rows(ctx, state, assignment, world)
        solution = assemble_and_solve(self.problem_for(ctx, rows), self.workspaces)

        for _ in range(self.config.refinement_passes):
            if not solution.feasible:
                break
            candidate = self.to_plan(state, solution, world.step)
            ctx = HorizonContext.build(state, self.layout, self.limits, self.config, candidate, world.step)
            refined = assemble_and_solve(
                self.problem_for(ctx, self.build_rows(ctx, state, assignment, world)), self.workspaces
            )
            change = float(np.max(np.abs(refined.u - solution.u)))
            solution = refined
            if change < self.config.refinement_tolerance:
                break
        return solution

    def fallback(self, state: VehicleState) -> MpcSolution:
        """Braking plan for a CAV that has no solved horizon"""
        ctx = HorizonContext.build(state, self.layout, self.limits, self.config)
        return fallback_solution(self.problem_for(ctx, []), SolveStatus.FALLBACK, time.perf_counter())

    @staticmethod
    def to_plan(state: VehicleState, solution: MpcSolution, step: int) -> VehiclePlan:
        return VehiclePlan(
            vehicle_id=state.id,
            start_step=step,
            u=solution.u,
            v=solution.v,
            d=state.d + (solution.x - solution.x[0]),
            status=solution.status,
        )

    def evaluate_sequence(self, sequence: Sequence, group: MergingGroup, world: WorldSnapshot) -> SequenceEvaluation:
        """Solve for each CAV in sequence order; earlier plans feed later predictions"""
        members = group.members
        plans: Dict[int, VehiclePlan] = dict(world.plans)
        solutions: Dict[int, MpcSolution] = {}
        infeasible: List[int] = []
        for vid in sequence.order:
            if not members[vid].is_cav:
                continue
            view = replace(world, plans=MappingProxyType(plans))
            state = world.vehicles[vid]
            solution = self.plan(state, sequence.assignment(vid), view)
            solutions[vid] = solution
            plans[vid] = self.to_plan(state, solution, world.step)
            if not solution.feasible:
                infeasible.append(vid)
        cost = math.inf if infeasible else math.fsum(s.objective for s in solutions.values())
        return SequenceEvaluation(
            sequence=sequence,
            cost=cost,
            solutions=MappingProxyType(solutions),
            feasible=not infeasible,
            infeasible_ids=tuple(infeasible),
        )
