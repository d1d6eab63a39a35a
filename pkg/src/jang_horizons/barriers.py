"""Boundary admissibility and the explicit Perron barriers.

Super solution, per inner boundary part with its own delta:

    u_sup = (d_2 - delta) / t   where d_2 <= delta,   0 elsewhere,

sub solution with C = 1 + n |p|_C0:

    u_sub = ln(1 - d_1 / delta)  where d_1 <= delta (1 - exp(-C/t)),   -C/t elsewhere.

d_1, d_2 are metric distances to the outer and inner boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import AdmissibilityError, BarrierError
from .initial_data import GHOST_INNER, GHOST_OUTER, DomainGrid, InitialDataSet
from .jang_core import GraphOperator
from .levelset import metric_distance, normal_and_curvature, sample, trace_on_surface, zero_set


def expansion_margin(H, T, eps, mode, cutoff=0.0, dim=3):
    """Signed amount by which a surface is untrapped (positive = untrapped)."""
    if mode == "generalized":
        return H - np.sqrt(T * T + eps * eps)
    return H + T - eps * cutoff * (dim - 1)


def surface_scalars(grid, ids, F, points):
    """H and tr_S p at points on level sets of F (normal along dF)."""
    _, _, nu, H = normal_and_curvature(grid, ids, F)
    Hs = sample(grid, H, points)
    nus = sample(grid, nu, points)
    g = ids._g(points)
    nus = nus / np.sqrt(np.einsum("ni,nij,nj->n", nus, g, nus))[:, None]
    return Hs, trace_on_surface(ids, points, nus)


@dataclass
class AdmissibilityReport:
    outer_margin: float
    inner_margin: float
    outer_worst: np.ndarray
    inner_worst: np.ndarray

    @property
    def outer_ok(self):
        return self.outer_margin > 0

    @property
    def inner_ok(self):
        return self.inner_margin > 0

    @property
    def ok(self):
        return self.outer_ok and self.inner_ok


def boundary_admissibility(grid: DomainGrid, ids: InitialDataSet, eps, mode="generalized",
                           raise_on_fail=True):
    """Sample both boundaries and report the admissibility margins."""
    pts_out, _ = zero_set(grid, grid.phi_outer)
    H, T = surface_scalars(grid, ids, grid.phi_outer, pts_out)
    m_out = expansion_margin(H, T, eps, mode, 0.0, grid.dim)
    inner_pts, m_in = [], []
    for part in grid.inner_parts:
        pts, _ = zero_set(grid, part)
        if len(pts) == 0:
            continue
        H, T = surface_scalars(grid, ids, part, pts)
        # a part's points hidden inside another part are not on the boundary
        keep = sample(grid, grid.phi_inner, pts) > -0.5 * grid.h
        inner_pts.append(pts[keep])
        m_in.append(-expansion_margin(H, T, eps, mode, 1.0, grid.dim)[keep])
    if inner_pts:
        inner_pts = np.concatenate(inner_pts)
        m_in = np.concatenate(m_in)
    else:
        inner_pts, m_in = np.zeros((1, grid.dim)), np.array([np.inf])
    i_out, i_in = int(np.argmin(m_out)), int(np.argmin(m_in))
    report = AdmissibilityReport(float(m_out[i_out]), float(m_in[i_in]), pts_out[i_out], inner_pts[i_in])
    if raise_on_fail and not report.ok:
        which = "outer" if not report.outer_ok else "inner"
        point = report.outer_worst if which == "outer" else report.inner_worst
        margin = report.outer_margin if which == "outer" else report.inner_margin
        raise AdmissibilityError(f"{which} boundary not admissible: margin {margin:.4g} at {point}",
                                 point, margin)
    return report


def _delta_ok(grid, ids, eps, mode, part, delta, d_part, band_geometry):
    h = grid.h
    if 2 * delta >= grid.separation() - h:
        return False
    H_nodes, T_nodes, grad_norm = band_geometry
    collar = (d_part >= 0) & (d_part < 2 * delta) & (grid.phi_outer < 0)
    if collar.any():
        margin = -expansion_margin(H_nodes[collar], T_nodes[collar], eps, mode, 1.0, grid.dim)
        if np.any(~np.isfinite(margin)) or np.any(margin <= 2 * delta):
            return False
        gn = grad_norm[collar]
        if np.any(np.abs(gn - 1) > 10 * h):
            return False
    pts, _ = zero_set(grid, part)
    H, T = surface_scalars(grid, ids, part, pts)
    margin = -expansion_margin(H, T, eps, mode, 1.0, grid.dim)
    return bool(np.all(margin > 2 * delta))


def choose_delta(grid: DomainGrid, ids: InitialDataSet, eps, mode="generalized", part=None,
                 min_delta=None):
    """Largest dyadic delta for which the inner collar is strictly trapped.

    Searches delta = sep/4, sep/8, ... and finally ``min_delta`` itself (default 2h).
    """
    h = grid.h
    min_delta = 2 * h if min_delta is None else min_delta
    parts = grid.inner_parts if part is None else [part]
    deltas = []
    for phi in parts:
        d = metric_distance(grid, ids, phi)
        _, _, nu, H = normal_and_curvature(grid, ids, phi)
        collar = (d >= 0) & (d < grid.separation() / 2)
        T = np.full(grid.shape, np.nan)
        with np.errstate(all="ignore"):
            pts = grid.points[collar]
            nus = nu[collar]
            T[collar] = trace_on_surface(ids, pts, nus)
            dd = np.stack(np.gradient(d, h), axis=-1)
            data_ginv = np.linalg.inv(ids._g(grid.points[collar]))
            gn = np.full(grid.shape, np.nan)
            gn[collar] = np.sqrt(np.einsum("ni,nij,nj->n", dd[collar], data_ginv, dd[collar]))
        candidates = []
        delta = grid.separation() / 4
        while delta > min_delta:
            candidates.append(delta)
            delta /= 2
        # the dyadic ladder can jump over the smallest allowed value
        candidates.append(min_delta)
        found = None
        for delta in candidates:
            if _delta_ok(grid, ids, eps, mode, phi, delta, d, (H, T, gn)):
                found = delta
                break
        if found is None:
            raise BarrierError(f"no admissible delta >= {min_delta:.4g} (grid too coarse or inner "
                               "boundary not strictly trapped)")
        deltas.append(found)
    return deltas[0] if part is not None or len(deltas) == 1 else deltas


def data_bound(grid: DomainGrid, ids: InitialDataSet, mode="generalized", eps=0.0):
    """C = 1 + n |p|_C0 over the closure nodes of Omega."""
    from .initial_data import INTERIOR, GHOST_INNER, GHOST_OUTER

    sel = np.isin(grid.mask, (INTERIOR, GHOST_INNER, GHOST_OUTER))
    p0 = _p_sup(ids, grid.points[sel])
    if mode == "mots":
        p0 = p0 + eps
    return 1 + grid.dim * p0


def _p_sup(ids, pts):
    g = ids._g(pts)
    p = ids._p(pts)
    linv = np.linalg.inv(np.linalg.cholesky(g))
    sym = linv @ p @ np.swapaxes(linv, -1, -2)
    return float(np.max(np.abs(np.linalg.eigvalsh(sym))))


@dataclass
class BarrierPair:
    upper: np.ndarray      # on interior nodes
    lower: np.ndarray
    deltas: list
    t: float
    eps: float
    C: float
    d_outer: np.ndarray = field(repr=False, default=None)
    d_inner: np.ndarray = field(repr=False, default=None)
    marginal: tuple = ()     # parts whose super branch is a clamp only

    @property
    def delta(self):
        return min(self.deltas)

    @property
    def theta(self):
        return self.delta / 2

    @property
    def outer_threshold(self):
        return self.delta * (1 - np.exp(-self.C / self.t))


def barrier_fields(grid, ids, t, deltas, C):
    """Compute (upper, lower, d_outer, d_inner) on interior nodes."""
    if np.isscalar(deltas):
        deltas = [deltas] * len(grid.inner_parts)
    inside = grid.interior
    upper = np.zeros(int(inside.sum()))
    d_inner = np.full(int(inside.sum()), np.inf)
    for phi, delta in zip(grid.inner_parts, deltas):
        d = metric_distance(grid, ids, phi)[inside]
        d_inner = np.minimum(d_inner, d)
        upper = np.minimum(upper, np.where(d <= delta, (d - delta) / t, 0.0))
    delta = min(deltas) if len(deltas) else np.inf
    d_outer = np.maximum(-metric_distance(grid, ids, grid.phi_outer)[inside], 0.0)
    threshold = delta * (1 - np.exp(-C / t))
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = np.where(d_outer <= threshold, np.log1p(-d_outer / delta), -C / t)
    return upper, lower, d_outer, d_inner


def _rings(mask, count):
    """Nodes within ``count`` axis steps of the mask."""
    return ndimage.binary_dilation(mask, iterations=count)


def barrier_check(grid, op: GraphOperator, pair: BarrierPair, ids=None):
    """Return (sup of positive residual of upper, sup of negative residual of lower).

    The barriers are a min (upper) and a max (lower) of smooth branches. Each
    branch is extended past its kink and checked on the nodes where it is
    the active one, so stencils never straddle a kink.
    """
    ids = ids or op.ids
    t, eps = pair.t, pair.eps
    up = -np.inf
    inside = grid.interior
    for k, (phi, delta) in enumerate(zip(grid.inner_parts, pair.deltas)):
        if k in pair.marginal:
            continue
        d = metric_distance(grid, ids, phi)[inside]
        ramp = (d - delta) / t
        active = (d <= delta) & (ramp <= pair.upper + 1e-12)
        if active.any():
            up = max(up, float(np.max(op.residual(ramp, t, eps)[active])))
    flat = pair.upper >= 0
    if flat.any():
        up = max(up, float(np.max(op.residual(np.zeros(op.N), t, eps)[flat])))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_branch = np.log1p(-pair.d_outer / pair.delta)
        R_log = op.residual(np.where(np.isfinite(log_branch), log_branch, -1e6), t, eps)
    on_log = (pair.d_outer <= pair.outer_threshold) & np.isfinite(R_log)
    # the log branch is resolved only where its slope varies slowly across
    # a stencil, and the Dirichlet ghost stencil is not involved
    near_outer = _rings(grid.mask == GHOST_OUTER, 2)[inside]
    on_log &= (pair.delta - pair.d_outer >= 3 * grid.h) & ~near_outer
    lo = -np.inf
    if on_log.any():
        lo = float(-np.min(R_log[on_log]))
    const = ~(pair.d_outer <= pair.outer_threshold)
    if const.any():
        R_c = op.residual(np.full(op.N, -pair.C / t), t, eps)
        # next to the holes the contact flux, not the barrier, sets the stencil
        near_inner = _rings(grid.mask == GHOST_INNER, 2)[inside]
        sel = const & ~near_outer & ~near_inner
        if sel.any():
            lo = max(lo, float(-np.min(R_c[sel])))
    return up, lo


def build_barriers(grid: DomainGrid, ids: InitialDataSet, t, eps, deltas, op=None,
                   mode="generalized", check=True, C=None, marginal=()):
    """Barrier pair for (t, eps); optionally verify the discrete inequalities.

    ``marginal`` lists inner parts that are horizons themselves (no strict
    collar exists); their ramp is used as an envelope but not checked.
    """
    if np.isscalar(deltas):
        deltas = [float(deltas)] * len(grid.inner_parts)
    C = data_bound(grid, ids, mode, eps) if C is None else C
    upper, lower, d_outer, d_inner = barrier_fields(grid, ids, t, deltas, C)
    pair = BarrierPair(upper, lower, list(deltas), t, eps, C, d_outer, d_inner, tuple(marginal))
    if check:
        op = op or GraphOperator(grid, ids, mode)
        tol = 10 * grid.h
        up, lo = barrier_check(grid, op, pair, ids)
        if up > tol or lo > tol:
            max_t = _max_admissible_t(grid, ids, eps, deltas, op, C, t, tol, pair.marginal)
            raise BarrierError(f"barrier residual check failed at t = {t:.4g} "
                               f"(super {up:.3g}, sub {lo:.3g}); largest admissible t ~ {max_t:.4g}",
                               max_t)
    return pair


def _max_admissible_t(grid, ids, eps, deltas, op, C, t_hi, tol, marginal=(), iterations=20):
    lo, hi = 0.0, t_hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fields = barrier_fields(grid, ids, mid, deltas, C)
        pair = BarrierPair(fields[0], fields[1], list(deltas), mid, eps, C, fields[2], fields[3], marginal)
        up, low = barrier_check(grid, op, pair, ids)
        if up <= tol and low <= tol:
            lo = mid
        else:
            hi = mid
    return lo
