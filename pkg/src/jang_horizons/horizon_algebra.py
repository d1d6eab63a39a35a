"""Trapped domains, the enclosing-horizon construction and the outermost iteration.

A trapped domain is stored by the region it encloses (a node mask holding
the holes) together with a signed field that is negative exactly there.
Intersecting two domains unions the enclosed regions; the new domain has
one inner part per input, so each keeps its own barrier and the super
solution is their nodewise minimum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .barriers import choose_delta, data_bound
from .capillary_solver import ContinuationResult, ContinuationSchedule, blow_down_region, continue_in_t
from .errors import BarrierError, GeometryError, IterationError
from .horizon_geometry import (HorizonSurface, extract_surface, hausdorff, mesh_signed_distance,
                               redistanced_indicator, verify_surface)
from .initial_data import DomainGrid, InitialDataSet
from .jang_core import GraphOperator, kappa_squared, smoothstep
from .levelset import metric_distance

log = logging.getLogger(__name__)


@dataclass
class TrappedDomain:
    """Outer region between the outer boundary and a trapped (or horizon) boundary."""
    phi_outer: np.ndarray
    phi: np.ndarray           # negative on the enclosed region
    origin: np.ndarray
    h: float
    surface: HorizonSurface = None
    marginal: bool = False    # True when the inner boundary is itself a horizon

    @property
    def enclosed(self):
        return self.phi <= 0

    @property
    def mask(self):
        """Nodes of the open outer region."""
        return (self.phi_outer < 0) & ~self.enclosed

    def grid(self):
        return DomainGrid(self.origin, self.h, self.phi.shape, self.phi_outer, self.phi, [self.phi])

    @classmethod
    def from_grid(cls, grid: DomainGrid):
        """The domain of an ordinary DomainGrid (its inner boundary as the trapped surface)."""
        return cls(grid.phi_outer, grid.phi_inner.copy(), np.array(grid.origin), grid.h)

    @classmethod
    def from_shape(cls, grid: DomainGrid, shape):
        return cls(grid.phi_outer, shape.signed_distance(grid.points), np.array(grid.origin), grid.h)

    @classmethod
    def from_mask(cls, grid: DomainGrid, mask):
        mask = np.asarray(mask, bool)
        if mask.shape != grid.shape:
            raise GeometryError("seed mask does not match the grid")
        return cls(grid.phi_outer, redistanced_indicator(mask, grid.h), np.array(grid.origin), grid.h)

    @classmethod
    def from_mesh(cls, grid: DomainGrid, vertices, cells):
        """Region bounded by a closed mesh, with the distance to the mesh itself as field."""
        from .horizon_geometry import mesh_inside_mask

        vertices, cells = np.asarray(vertices, float), np.asarray(cells, int)
        enclosed = mesh_inside_mask(grid, vertices, cells)
        if not enclosed.any():
            raise GeometryError("seed mesh encloses no grid nodes")
        phi = mesh_signed_distance(grid, vertices, cells, enclosed)
        surf = HorizonSurface(vertices, cells, grid.dim, inside_mask=enclosed, grid=grid)
        return cls(grid.phi_outer, phi, np.array(grid.origin), grid.h, surf)

    @classmethod
    def from_surface(cls, grid: DomainGrid, surf: HorizonSurface, enclosed=None):
        enclosed = surf.inside_mask if enclosed is None else enclosed | surf.inside_mask
        phi = mesh_signed_distance(grid, surf.vertices, surf.cells, enclosed)
        return cls(grid.phi_outer, phi, np.array(grid.origin), grid.h, surf, marginal=True)


def intersect_domains(A: TrappedDomain, B: TrappedDomain) -> DomainGrid:
    """Domain of the intersection of the two outer regions."""
    if A.phi.shape != B.phi.shape or not np.allclose(A.origin, B.origin) or A.h != B.h:
        raise GeometryError("trapped domains live on different grids")
    if not np.array_equal(A.phi_outer, B.phi_outer):
        raise GeometryError("trapped domains have different outer boundaries")
    parts = [A.phi] if (A is B or np.array_equal(A.phi, B.phi)) else [A.phi, B.phi]
    phi_inner = np.min(parts, axis=0)
    if not ((A.phi_outer < 0) & (phi_inner > 0)).any():
        raise GeometryError("intersection of the trapped domains has no interior")
    return DomainGrid(A.origin, A.h, A.phi.shape, A.phi_outer, phi_inner, parts)


def mots_cutoff(grid: DomainGrid, ids: InitialDataSet, inner=0.25, outer=0.75):
    """Smoothstep of the distance to the outer boundary: 0 near it, 1 deep inside.

    The ramp runs between the fractions ``inner`` and ``outer`` of the
    boundary separation.
    """
    d1 = np.maximum(-metric_distance(grid, ids, grid.phi_outer), 0.0)[grid.interior]
    sep = grid.separation() if np.isfinite(grid.separation()) else float(np.max(d1))
    return smoothstep((d1 - inner * sep) / ((outer - inner) * sep))


@dataclass
class FindResult:
    surface: HorizonSurface
    continuation: ContinuationResult
    grid: DomainGrid
    deltas: list
    marginal: tuple
    C: float
    report: object = None

    @property
    def solution(self):
        return self.continuation.final


def _deltas(grid, ids, eps, mode, marginal_parts, min_delta=None):
    deltas, marginal = [], []
    for k, part in enumerate(grid.inner_parts):
        if k in marginal_parts:
            deltas.append(2 * grid.h if min_delta is None else min_delta)
            marginal.append(k)
            continue
        try:
            deltas.append(choose_delta(grid, ids, eps, mode, part=part, min_delta=min_delta))
        except BarrierError:
            deltas.append(2 * grid.h if min_delta is None else min_delta)
            marginal.append(k)
    return deltas, tuple(marginal)


def find_horizon(grid: DomainGrid, ids: InitialDataSet, schedule: ContinuationSchedule = None,
                 mode="generalized", marginal_parts=(), verify=False, probe_trials=50,
                 stability_trials=100, seed=0, allow_marginal=None, min_delta=None):
    """Run continuation on ``grid`` and extract the horizon of the final solve.

    Inner parts listed in ``marginal_parts`` (or, when ``allow_marginal``
    is true, any part without an admissible collar) get a clamp-only
    super barrier of width 2h.
    """
    from .barriers import boundary_admissibility

    schedule = schedule or ContinuationSchedule()
    allow_marginal = bool(marginal_parts) if allow_marginal is None else allow_marginal
    boundary_admissibility(grid, ids, schedule.eps_min, mode, raise_on_fail=not allow_marginal)
    if allow_marginal:
        deltas, marginal = _deltas(grid, ids, schedule.eps_min, mode, set(marginal_parts), min_delta)
    else:
        deltas = choose_delta(grid, ids, schedule.eps_min, mode, min_delta=min_delta)
        deltas = [deltas] if np.isscalar(deltas) else list(deltas)
        marginal = ()
    cutoff = mots_cutoff(grid, ids) if mode == "mots" else None
    op = GraphOperator(grid, ids, mode, cutoff)
    cont = continue_in_t(schedule, grid, ids, mode, deltas=deltas, op=op, marginal=marginal)
    sol = cont.final
    theta = cont.barriers.theta
    region = blow_down_region(sol, schedule.blow_down_factor * theta / sol.t)
    surf = extract_surface(region, grid, ids, sol, mode)
    C = data_bound(grid, ids, mode, schedule.eps0)
    result = FindResult(surf, cont, grid, deltas, marginal, C)
    if verify:
        kappa2 = kappa_squared(ids, grid.points[grid.interior])
        result.report = verify_surface(surf, ids, C, kappa2, mode, probe_trials=probe_trials,
                                       stability_trials=stability_trials, seed=seed, sweep_field=sol.u)
    return result


def enclosing_horizon(A: TrappedDomain, B: TrappedDomain, ids: InitialDataSet,
                      schedule: ContinuationSchedule = None, mode="generalized", verify=False):
    """Horizon enclosing both trapped regions, solved on the intersected domain.

    Returns (surface, new TrappedDomain, FindResult).
    """
    grid = intersect_domains(A, B)
    marginal = []
    sources = [A] if len(grid.inner_parts) == 1 else [A, B]
    for k, dom in enumerate(sources):
        if dom.marginal:
            marginal.append(k)
    res = find_horizon(grid, ids, schedule, mode, marginal_parts=tuple(marginal), verify=verify,
                       allow_marginal=True)
    enclosed = A.enclosed | B.enclosed
    new = TrappedDomain.from_surface(grid, res.surface, enclosed)
    return res.surface, new, res


@dataclass
class OutermostResult:
    surface: HorizonSurface
    domain: TrappedDomain
    fold_distances: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    masks_decreasing: list = field(default_factory=list)
    rounds: int = 0
    last: object = None


def outermost(grid: DomainGrid, ids: InitialDataSet, seeds, schedule: ContinuationSchedule = None,
              mode="generalized", max_rounds=6, verify=False):
    """Fold the seeds with enclosing_horizon, then re-solve until the horizon stops moving.

    Every step is checked to shrink the outer region (node-mask subset).
    """
    if not seeds:
        raise GeometryError("outermost needs at least one seed")
    seeds = [s if isinstance(s, TrappedDomain) else TrappedDomain.from_mask(grid, s) for s in seeds]
    out = OutermostResult(None, None)
    surf, D, res = enclosing_horizon(seeds[0], seeds[0], ids, schedule, mode)
    out.masks_decreasing.append(bool(np.all(D.mask <= seeds[0].mask)))
    for s in seeds[1:]:
        prev = D
        surf_new, D, res = enclosing_horizon(D, s, ids, schedule, mode)
        out.masks_decreasing.append(bool(np.all(D.mask <= prev.mask)))
        out.fold_distances.append(hausdorff(surf_new.vertices, surf.vertices))
        surf = surf_new
    for k in range(max_rounds):
        prev = D
        surf_new, D, res = enclosing_horizon(D, D, ids, schedule, mode)
        out.masks_decreasing.append(bool(np.all(D.mask <= prev.mask)))
        dist = hausdorff(surf_new.vertices, surf.vertices)
        out.distances.append(dist)
        surf = surf_new
        out.rounds = k + 1
        log.info("outermost round %d: Hausdorff distance %.4g", k + 1, dist)
        if dist < grid.h / 2:
            break
    else:
        raise IterationError(f"outermost iteration did not settle in {max_rounds} rounds",
                             out.distances)
    if verify:
        sol = res.solution
        # curvature data only outside the horizon: the enclosed region may hold singularities
        kappa2 = kappa_squared(ids, grid.points[D.mask])
        res.report = verify_surface(surf, ids, res.C, kappa2, mode, sweep_field=sol.u)
    out.surface, out.domain, out.last = surf, D, res
    return out
