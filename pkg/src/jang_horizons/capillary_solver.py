"""Projected Newton solves of the regularised Jang equation and continuation.

For fixed (t, eps) the discrete equation R(u) = 0 is solved by damped
Newton steps, each followed by clamping into the barrier envelope
[lower, upper]. Continuation first lowers t at the starting eps, then
lowers eps at the final t, warm starting every solve from the previous one.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse.linalg as spla
from scipy.spatial.distance import directed_hausdorff

from .barriers import BarrierPair, build_barriers, choose_delta, data_bound
from .errors import NumericError, SolverError
from .initial_data import DomainGrid, InitialDataSet
from .jang_core import GraphOperator, GraphSolution
from .levelset import zero_set

log = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 60000


@dataclass
class ContinuationSchedule:
    t0: float = 0.2
    t_min: float = 0.0125
    eps0: float = 0.04
    eps_min: float = 0.01
    newton_tol: float = 1e-8
    max_newton: int = 60
    blow_down_factor: float = 0.5
    stop_on_stall: bool = False

    def __post_init__(self):
        if not (self.t0 >= self.t_min > 0 and self.eps0 >= self.eps_min > 0):
            raise ValueError("schedule needs t0 >= t_min > 0 and eps0 >= eps_min > 0")
        if self.newton_tol <= 0 or self.max_newton < 1:
            raise ValueError("newton tolerance and iteration cap must be positive")

    @staticmethod
    def _halving(start, stop):
        out = [start]
        while out[-1] / 2 > stop * (1 + 1e-9):
            out.append(out[-1] / 2)
        if out[-1] > stop * (1 + 1e-9):
            out.append(stop)
        return out

    @property
    def t_values(self):
        return self._halving(self.t0, self.t_min)

    @property
    def eps_values(self):
        return self._halving(self.eps0, self.eps_min)

    def steps(self):
        """(t, eps) pairs: t continuation at eps0, then eps continuation at t_min."""
        pairs = [(t, self.eps0) for t in self.t_values]
        pairs += [(self.t_min, e) for e in self.eps_values[1:]]
        return pairs


@dataclass
class StepRecord:
    t: float
    eps: float
    newton_iterations: int
    residual: float
    min_u: float
    envelope_violations: int
    sup_mean_curvature: float
    curvature_bound: float
    lower_bound_violations: int
    collar_violations: int
    outer_collar_violations: int
    seconds: float

    @property
    def curvature_ok(self):
        return self.sup_mean_curvature <= self.curvature_bound

    @property
    def ok(self):
        return (self.envelope_violations == 0 and self.curvature_ok and self.lower_bound_violations == 0
                and self.collar_violations == 0 and self.outer_collar_violations == 0)


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    stopped_early: bool = False

    def append(self, rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ok(self):
        return all(r.ok for r in self.records)

    def table(self):
        """Plain-text table, one row per accepted step."""
        head = ("t", "eps", "newton", "residual", "min_u", "env_viol", "sup_H", "2C", "seconds")
        rows = ["  ".join(f"{h:>10}" for h in head)]
        for r in self.records:
            vals = (f"{r.t:.5g}", f"{r.eps:.5g}", str(r.newton_iterations), f"{r.residual:.3e}",
                    f"{r.min_u:.5g}", str(r.envelope_violations), f"{r.sup_mean_curvature:.4g}",
                    f"{r.curvature_bound:.4g}", f"{r.seconds:.2f}")
            rows.append("  ".join(f"{v:>10}" for v in vals))
        return "\n".join(rows)


def _krylov(J, rhs, M):
    du, info = spla.gmres(J, rhs, M=M, rtol=1e-10, atol=0.0, restart=60, maxiter=20)
    rel = np.linalg.norm(J @ du - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return du, info == 0 or rel < 1e-6, rel


def _linear_solve(J, rhs, dim=2):
    """Sparse LU for small 2D systems, otherwise GMRES with AMG (ILU as fallback)."""
    n = J.shape[0]
    try:
        if dim == 2 and n <= DIRECT_SOLVE_LIMIT:
            du = spla.splu(J.tocsc()).solve(rhs)
        else:
            ml = pyamg.smoothed_aggregation_solver(J.tocsr(), symmetry="nonsymmetric")
            du, ok, rel = _krylov(J, rhs, ml.aspreconditioner())
            if not ok:
                ilu = spla.spilu(J.tocsc(), drop_tol=1e-4, fill_factor=10)
                du, ok, rel = _krylov(J, rhs, spla.LinearOperator(J.shape, ilu.solve))
            if not rel < 1e-4:
                raise NumericError(f"Krylov solve stalled (relative residual {rel:.2e})")
    except RuntimeError as exc:
        raise NumericError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(du)):
        raise NumericError("linear solve produced non-finite values")
    return du


def _project(u, barriers):
    return np.minimum(np.maximum(u, barriers.lower), barriers.upper)


def solve_fixed(t, eps, grid: DomainGrid, ids: InitialDataSet, barriers: BarrierPair,
                warm_start=None, op=None, mode="generalized", tol=1e-8, max_iter=60,
                min_damping=2.0 ** -30):
    """Projected damped Newton for R(u) = 0 inside the barrier envelope."""
    op = op or GraphOperator(grid, ids, mode)
    start = barriers.upper if warm_start is None else warm_start
    u = _project(np.asarray(start, float).copy(), barriers)
    history = []
    R = op.residual(u, t, eps)
    for it in range(max_iter + 1):
        norm = float(np.max(np.abs(R)))
        history.append(norm)
        if norm <= tol:
            return GraphSolution(u, t, eps, op, dict(iterations=it, residual=norm, history=history))
        if it == max_iter:
            break
        R, J = op.residual(u, t, eps, with_jacobian=True)
        # nodes pinned to the envelope that Newton wants to push out stay fixed
        du = _linear_solve(J, -R, op.dim)
        pinned = ((u <= barriers.lower) & (du < 0)) | ((u >= barriers.upper) & (du > 0))
        if pinned.any():
            free = ~pinned
            Jf = J[free][:, free]
            du = np.zeros_like(u)
            du[free] = _linear_solve(Jf, -R[free], op.dim)
        merit = float(np.linalg.norm(R[~pinned]))
        lam = 1.0
        while True:
            trial = _project(u + lam * du, barriers)
            R_trial = op.residual(trial, t, eps)
            if np.all(np.isfinite(R_trial)) and np.linalg.norm(R_trial[~pinned]) <= (1 - 1e-4 * lam) * merit:
                break
            lam /= 2
            if lam < min_damping:
                exc = SolverError(f"Newton stagnated at t = {t:.4g}, eps = {eps:.4g} "
                                  f"(residual {norm:.3e})", history)
                exc.last_u = u
                raise exc
        u, R = trial, R_trial
        if pinned.any() and np.max(np.abs(R[~pinned]), initial=0.0) <= tol:
            # converged on the free set; the pinned nodes sit on a barrier
            norm = float(np.max(np.abs(R)))
            history.append(norm)
            return GraphSolution(u, t, eps, op, dict(iterations=it + 1, residual=norm, history=history,
                                                     pinned=int(pinned.sum())))
    exc = SolverError(f"Newton did not converge in {max_iter} iterations at t = {t:.4g}, "
                      f"eps = {eps:.4g} (residual {history[-1]:.3e})", history)
    exc.last_u = u
    raise exc


def step_diagnostics(sol: GraphSolution, barriers: BarrierPair, seconds=0.0, slack=1e-10):
    """Barrier-bound and curvature checks for one converged solve."""
    u, t = sol.u, sol.t
    env = int(np.sum((u < barriers.lower - slack) | (u > barriers.upper + slack)))
    bounds = int(np.sum((u > slack) | (u < -barriers.C / t - slack)))
    theta = barriers.theta
    collar = barriers.d_inner <= theta
    collar_bad = int(np.sum(u[collar] > -theta / t + slack))
    near_outer = barriers.d_outer < theta
    with np.errstate(divide="ignore", invalid="ignore"):
        floor = np.log1p(-barriers.d_outer[near_outer] / theta)
    outer_bad = int(np.sum(u[near_outer] < floor - slack))
    H = sol.op.mean_curvature(u)
    return StepRecord(t, sol.eps, int(sol.info.get("iterations", 0)), float(sol.info.get("residual", np.nan)),
                      float(u.min()), env, float(np.max(np.abs(H))), 2 * barriers.C, bounds, collar_bad,
                      outer_bad, seconds)


def blow_down_region(sol: GraphSolution, K=None, theta=None):
    """Boolean grid mask of interior nodes with u < -K (default K = theta / (2t))."""
    if K is None:
        if theta is None:
            raise ValueError("give K or theta")
        K = theta / (2 * sol.t)
    full = np.zeros(sol.grid.shape, bool)
    full[sol.grid.interior] = sol.u < -K
    return full


def _interface(sol, K):
    F = sol.field(fill=np.nan)
    F = np.where(np.isnan(F), np.where(sol.grid.phi_outer >= 0, 0.0, -2 * K), F) + K
    pts, _ = zero_set(sol.grid, F)
    return pts


def hausdorff(a, b):
    if len(a) == 0 or len(b) == 0:
        return np.inf
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


@dataclass
class ContinuationResult:
    solutions: list
    trace: SolveTrace
    barriers: BarrierPair
    deltas: list
    op: GraphOperator

    @property
    def final(self):
        return self.solutions[-1]


def continue_in_t(schedule: ContinuationSchedule, grid: DomainGrid, ids: InitialDataSet,
                  mode="generalized", deltas=None, op=None, steps=None, keep_all=True,
                  check_barriers=True, marginal=()):
    """Run the schedule, returning every converged solution and the trace.

    ``steps`` replaces the default path by an explicit list of (t, eps).

    On a failed solve the SolverError carries the partial trace in
    ``exc.partial``.
    """
    op = op or GraphOperator(grid, ids, mode)
    if deltas is None:
        deltas = choose_delta(grid, ids, schedule.eps_min, mode)
    if np.isscalar(deltas):
        deltas = [float(deltas)] * len(grid.inner_parts)
    C = data_bound(grid, ids, mode, schedule.eps0)
    trace = SolveTrace()
    solutions, last_iface, pair, u = [], None, None, None

    def run(t, eps, u):
        start = time.perf_counter()
        pair = build_barriers(grid, ids, t, eps, deltas, op, mode, check=check_barriers, C=C,
                              marginal=marginal)
        try:
            sol = solve_fixed(t, eps, grid, ids, pair, warm_start=u, op=op, mode=mode,
                              tol=schedule.newton_tol, max_iter=schedule.max_newton)
        except SolverError as exc:
            exc.partial = trace
            raise
        rec = step_diagnostics(sol, pair, time.perf_counter() - start)
        trace.append(rec)
        log.info("t=%.4g eps=%.4g newton=%d residual=%.2e min_u=%.4g", t, eps,
                 rec.newton_iterations, rec.residual, rec.min_u)
        if keep_all or not solutions:
            solutions.append(sol)
        else:
            solutions[0] = sol
        return sol, pair

    if steps is None:
        t_last = schedule.t_values[-1]
        for t in schedule.t_values:
            sol, pair = run(t, schedule.eps0, u)
            u, t_last = sol.u, t
            if schedule.stop_on_stall:
                iface = _interface(sol, schedule.blow_down_factor * pair.theta / t)
                if last_iface is not None and hausdorff(iface, last_iface) < grid.h / 2:
                    trace.stopped_early = True
                    break
                last_iface = iface
        steps = [(t_last, e) for e in schedule.eps_values[1:]]
    for t, eps in steps:
        sol, pair = run(t, eps, u)
        u = sol.u
    if not keep_all:
        solutions = solutions[-1:]
    return ContinuationResult(solutions, trace, pair, deltas, op)
