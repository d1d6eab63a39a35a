"""Discrete graph operators on a DomainGrid.

The mean curvature of graph(u) is discretised in flux form,

    H(u)_i = (1 / (sqrt(g)_i h)) sum_k (F^k_{i+1/2} - F^k_{i-1/2}),
    F^k    = sqrt(g) g^{kl} q_l / v,    v = sqrt(1 + g^{ab} q_a q_b),

with face gradients q built from linear operators on the interior values.
Faces next to the outer boundary see u = 0 at the sub-cell crossing of
phi_outer. Faces next to the inner boundary carry the prescribed flux
sqrt(g) nu^k, where nu is the unit normal pointing into Omega: the graph
meets the inner boundary vertically, going down.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DataError, DomainError
from .initial_data import (GHOST_INNER, GHOST_OUTER, INTERIOR, DomainGrid, InitialDataSet,
                           christoffel)

THETA_FLOOR = 1e-3


def _csr(rows, cols, vals, shape):
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=shape)


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


class GraphOperator:
    """Precomputed stencils and data samples for one domain."""

    def __init__(self, grid: DomainGrid, ids: InitialDataSet, mode="generalized", cutoff=None):
        if ids.dim != grid.dim:
            raise DataError("data and grid dimensions differ")
        if mode not in ("generalized", "mots"):
            raise DataError(f"unknown mode {mode!r}")
        self.grid, self.ids, self.mode = grid, ids, mode
        n, h = grid.dim, grid.h
        self.dim = n
        shape = grid.shape
        self.flat_index = np.flatnonzero(grid.interior.ravel())
        N = len(self.flat_index)
        self.N = N
        strides = np.array([int(np.prod(shape[k + 1:])) for k in range(n)])
        mask = grid.mask.ravel()
        phi1 = grid.phi_outer.ravel()
        lookup = grid.index.ravel()
        I = self.flat_index
        pts = grid.points.reshape(-1, n)

        g = ids.metric(pts[I])
        self.g = g
        self.ginv = np.linalg.inv(g)
        self.sqrtg = np.sqrt(np.linalg.det(g))
        self.p = ids.tensor(pts[I])
        self.trace_data = np.einsum("...ij,...ij->...", self.ginv, self.p)
        self.pup = self.ginv @ self.p @ self.ginv
        if mode == "mots":
            self.cutoff = np.ones(N) if cutoff is None else np.asarray(cutoff, float)

        def theta(a, b):
            with np.errstate(divide="ignore", invalid="ignore"):
                th = phi1[a] / (phi1[a] - phi1[b])
            return np.clip(th, THETA_FLOOR, 1.0)

        # node-centred gradient operators
        self.G = []
        row_all = np.arange(N)
        for k in range(n):
            P, M = I + strides[k], I - strides[k]
            tP, tM = mask[P], mask[M]
            rows, cols, vals = [], [], []

            def add(sel, col_nodes, w):
                rows.append(row_all[sel])
                cols.append(lookup[col_nodes[sel]] if col_nodes is not None else row_all[sel])
                vals.append(np.broadcast_to(w, row_all[sel].shape).astype(float))

            both = (tP == INTERIOR) & (tM == INTERIOR)
            add(both, P, 1 / (2 * h))
            add(both, M, -1 / (2 * h))
            # Dirichlet zero at a sub-cell distance on one side
            for far, near, side, tfar, tnear in ((P, M, 1, tP, tM), (M, P, -1, tM, tP)):
                sel = (tfar == GHOST_OUTER) & (tnear == INTERIOR)
                th = theta(I, far)
                x0, x2 = -side * h, side * th * h
                w0 = -x2 / (x0 * (x0 - x2))
                w1 = (-x0 - x2) / (x0 * x2)
                add(sel, near, w0[sel] if np.ndim(w0) else w0)
                add(sel, None, w1[sel])
                # one-sided second order away from an inner-boundary neighbour
                sel = (tfar == GHOST_INNER) & (tnear == INTERIOR)
                near2 = I - 2 * side * strides[k]
                ok2 = mask[near2] == INTERIOR
                s2 = sel & ok2
                add(s2, None, side * 3 / (2 * h))
                add(s2, near, -side * 4 / (2 * h))
                add(s2, near2, side * 1 / (2 * h))
                s1 = sel & ~ok2
                add(s1, None, side / h)
                add(s1, near, -side / h)
                # ghosts on both sides
                sel = (tfar == GHOST_OUTER) & (tnear != INTERIOR) & (side == 1)
                th = theta(I, far)
                add(sel, None, (-1 / (th * h))[sel])
            self.G.append(_csr(rows, cols, vals, (N, N)))

        # faces
        self.faces = []
        part_grads, active = None, None
        if np.all(np.isfinite(grid.phi_inner)):
            # the min of several parts has kinks, so faces use the part active at the hole node
            parts = [np.asarray(q, float) for q in grid.inner_parts] or [grid.phi_inner]
            active = np.argmin(np.stack(parts), axis=0).ravel()
            part_grads = np.stack([np.stack(np.gradient(q, h, edge_order=2), axis=-1).reshape(-1, n)
                                   for q in parts])
        for k in range(n):
            P = I + strides[k]
            M = I - strides[k]
            lo = np.concatenate([I, M[mask[M] != INTERIOR]])
            hi = np.concatenate([P, I[mask[M] != INTERIOR]])
            tlo, thi = mask[lo], mask[hi]
            nf = len(lo)
            fixed = (tlo == GHOST_INNER) | (thi == GHOST_INNER)
            free = ~fixed
            # cut faces sit halfway between the node and the boundary crossing
            frac = np.full(len(lo), 0.5)
            s = (tlo == INTERIOR) & (thi == GHOST_OUTER)
            frac[s] = 0.5 * theta(lo[s], hi[s])
            s = (thi == INTERIOR) & (tlo == GHOST_OUTER)
            frac[s] = 1 - 0.5 * theta(hi[s], lo[s])
            mid = pts[lo] + (frac * h)[:, None] * np.eye(n)[k]
            gf = ids.metric(mid)
            ginv_f = np.linalg.inv(gf)
            sqrtg_f = np.sqrt(np.linalg.det(gf))
            frows = np.arange(nf)
            Q = []
            for l in range(n):
                rows, cols, vals = [], [], []
                if l == k:
                    s = free & (tlo == INTERIOR) & (thi == INTERIOR)
                    rows += [frows[s], frows[s]]
                    cols += [lookup[hi[s]], lookup[lo[s]]]
                    vals += [np.full(s.sum(), 1 / h), np.full(s.sum(), -1 / h)]
                    s = free & (tlo == INTERIOR) & (thi == GHOST_OUTER)
                    th = theta(lo[s], hi[s])
                    rows.append(frows[s]); cols.append(lookup[lo[s]]); vals.append(-1 / (th * h))
                    s = free & (thi == INTERIOR) & (tlo == GHOST_OUTER)
                    th = theta(hi[s], lo[s])
                    rows.append(frows[s]); cols.append(lookup[hi[s]]); vals.append(1 / (th * h))
                    Q.append(_csr(rows, cols, vals, (nf, N)))
                else:
                    wlo = np.where(tlo == INTERIOR, 1.0, 0.0)
                    whi = np.where(thi == INTERIOR, 1.0, 0.0)
                    tot = np.maximum(wlo + whi, 1.0)
                    wlo, whi = wlo / tot * free, whi / tot * free
                    Gl = self.G[l]
                    sel_lo = lookup[lo]
                    sel_hi = lookup[hi]
                    A = sp.diags(wlo) @ Gl[np.maximum(sel_lo, 0)]
                    B = sp.diags(whi) @ Gl[np.maximum(sel_hi, 0)]
                    Q.append((A + B).tocsr())
            prescribed = np.zeros(nf)
            if fixed.any():
                # unit normal of the inner level set, pointing into Omega
                hole = np.where(tlo[fixed] == GHOST_INNER, lo[fixed], hi[fixed])
                q = active[hole]
                grad = 0.5 * (part_grads[q, lo[fixed]] + part_grads[q, hi[fixed]])
                norm = np.sqrt(np.einsum("fi,fij,fj->f", grad, ginv_f[fixed], grad))
                nu_up = np.einsum("fij,fj->fi", ginv_f[fixed], grad) / norm[:, None]
                prescribed[fixed] = sqrtg_f[fixed] * nu_up[:, k]
            # divergence: +F/span to the lower node, -F/span to the upper node,
            # span being the distance between the node's two face centres
            plus = np.where(mask[P] == GHOST_OUTER, theta(I, P), 1.0)
            minus = np.where(mask[M] == GHOST_OUTER, theta(I, M), 1.0)
            span = 0.5 * (plus + minus) * h * self.sqrtg
            rows, cols, vals = [], [], []
            s = tlo == INTERIOR
            rows.append(lookup[lo[s]]); cols.append(frows[s]); vals.append(1 / span[lookup[lo[s]]])
            s = thi == INTERIOR
            rows.append(lookup[hi[s]]); cols.append(frows[s]); vals.append(-1 / span[lookup[hi[s]]])
            D = _csr(rows, cols, vals, (N, nf))
            self.faces.append(dict(Q=Q, D=D, ginv=ginv_f[:, k, :], ginv_full=ginv_f, sqrtg=sqrtg_f,
                                   free=free, prescribed=prescribed))

    # ------------------------------------------------------------------
    def node_gradient(self, u):
        return np.stack([G @ u for G in self.G], axis=-1)

    def mean_curvature(self, u, with_jacobian=False):
        H = np.zeros(self.N)
        J = None
        for k, face in enumerate(self.faces):
            q = np.stack([Q @ u for Q in face["Q"]], axis=-1)
            gq = np.einsum("fij,fj->fi", face["ginv_full"], q)
            v = np.sqrt(1 + np.einsum("fi,fi->f", q, gq))
            flux = np.where(face["free"], face["sqrtg"] * gq[:, k] / v, face["prescribed"])
            H += face["D"] @ flux
            if with_jacobian:
                coef = face["sqrtg"] * face["free"]
                part = None
                for m in range(self.dim):
                    a = coef * (face["ginv_full"][:, k, m] / v - gq[:, k] * gq[:, m] / v ** 3)
                    term = sp.diags(a) @ face["Q"][m]
                    part = term if part is None else part + term
                J = face["D"] @ part if J is None else J + face["D"] @ part
        return (H, J.tocsr()) if with_jacobian else H

    def trace_terms(self, u):
        """Return tr(p)(u), its derivative in Du, w^2 and its derivative."""
        Du = self.node_gradient(u)
        gD = np.einsum("nij,nj->ni", self.ginv, Du)
        pD = np.einsum("nij,nj->ni", self.pup, Du)
        A = np.einsum("ni,ni->n", Du, pD)
        B = 1 + np.einsum("ni,ni->n", Du, gD)
        tr = self.trace_data - A / B
        dtr = -(2 * pD * B[:, None] - 2 * A[:, None] * gD) / B[:, None] ** 2
        w2 = (B - 1) / B
        dw2 = 2 * gD / B[:, None] ** 2
        return tr, dtr, w2, dw2

    def trace_p(self, u):
        return self.trace_terms(u)[0]

    def _gradient_jacobian(self, coef):
        """sum_m diag(coef[:, m]) G_m."""
        out = None
        for m, G in enumerate(self.G):
            term = sp.diags(coef[:, m]) @ G
            out = term if out is None else out + term
        return out

    def residual(self, u, t, eps, with_jacobian=False):
        if eps <= 0:
            raise DataError("eps must be positive")
        if with_jacobian:
            H, JH = self.mean_curvature(u, True)
        else:
            H = self.mean_curvature(u)
        tr, dtr, w2, dw2 = self.trace_terms(u)
        if self.mode == "generalized":
            reg = np.sqrt(tr * tr + eps * eps)
            R = H - reg - t * u
            if with_jacobian:
                J = JH - self._gradient_jacobian(dtr * (tr / reg)[:, None]) - t * sp.identity(self.N)
        else:
            c = eps * self.cutoff
            R = H + tr - c * (self.dim - w2) - t * u
            if with_jacobian:
                J = JH + self._gradient_jacobian(dtr + c[:, None] * dw2) - t * sp.identity(self.N)
        return (R, J.tocsr()) if with_jacobian else R

    def graph_metric_volume(self, u):
        """v = sqrt(1 + |Du|^2_g) at interior nodes."""
        Du = self.node_gradient(u)
        return np.sqrt(1 + np.einsum("ni,nij,nj->n", Du, self.ginv, Du))


# ----------------------------------------------------------------------
# solution container and module-level operations
# ----------------------------------------------------------------------

@dataclass
class GraphSolution:
    u: np.ndarray
    t: float
    eps: float
    op: GraphOperator
    info: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.op.grid

    @property
    def ids(self):
        return self.op.ids

    @property
    def Du(self):
        return self.op.node_gradient(self.u)

    @property
    def v(self):
        return self.op.graph_metric_volume(self.u)

    def field(self, fill=np.nan):
        return self.op.grid.to_grid(self.u, fill)


@dataclass
class ResidualField:
    values: np.ndarray

    @property
    def sup(self):
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


def graph_mean_curvature(sol: GraphSolution):
    return sol.op.mean_curvature(sol.u)


def graph_trace_p(sol: GraphSolution):
    return sol.op.trace_p(sol.u)


def regularized_trace(sol: GraphSolution, eps=None):
    eps = sol.eps if eps is None else eps
    if eps <= 0:
        raise DataError("eps must be positive")
    tr = graph_trace_p(sol)
    return np.sqrt(tr * tr + eps * eps)


def residual(sol: GraphSolution) -> ResidualField:
    return ResidualField(sol.op.residual(sol.u, sol.t, sol.eps))


def linearize(sol: GraphSolution):
    return sol.op.residual(sol.u, sol.t, sol.eps, with_jacobian=True)[1]


def kappa_squared(ids: InitialDataSet, points=None):
    """n sup|Ric| + 8n (sup|p|^2 + sup|dp|) + 1 over the sample points."""
    p0, p1, ric = ids.sup_norms(points)
    n = ids.dim
    return n * ric + 8 * n * (p0 ** 2 + p1) + 1


def _extended_field(sol: GraphSolution):
    """u on the full grid: zero on outer ghosts, nearest-value elsewhere."""
    from scipy import ndimage

    grid = sol.grid
    full = np.zeros(grid.shape)
    full[grid.interior] = sol.u
    outside = ~grid.interior & (grid.phi_outer < 0)
    if outside.any():
        idx = ndimage.distance_transform_edt(outside, return_distances=False, return_indices=True)
        full[outside] = full[tuple(i[outside] for i in idx)]
    return full


def graph_geometry_fields(sol: GraphSolution):
    """Grid fields of 1/v, |h|^2 and the graph Laplacian of 1/v.

    Values are meaningful on nodes whose two-ring neighbourhood lies in
    Omega; other nodes are NaN.
    """
    grid, ids = sol.grid, sol.ids
    n, h = grid.dim, grid.h
    u = _extended_field(sol)
    pts = grid.points
    g = ids.metric(pts)
    ginv = np.linalg.inv(g)
    gam = christoffel(g, ids.dmetric(pts))
    du = np.stack(np.gradient(u, h), axis=-1)
    hess = np.stack([np.stack(np.gradient(du[..., i], h), axis=-1) for i in range(n)], axis=-2)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2)) - np.einsum("...kij,...k->...ij", gam, du)
    gdu = np.einsum("...ij,...j->...i", ginv, du)
    v = np.sqrt(1 + np.einsum("...i,...i->...", du, gdu))
    gbar_inv = ginv - gdu[..., :, None] * gdu[..., None, :] / v[..., None, None] ** 2
    hh = hess / v[..., None, None]
    h2 = np.einsum("...ik,...jl,...ij,...kl->...", gbar_inv, gbar_inv, hh, hh)
    inv_v = 1 / v
    dinv = np.stack(np.gradient(inv_v, h), axis=-1)
    vol = np.sqrt(np.linalg.det(g)) * v
    flux = vol[..., None] * np.einsum("...ij,...j->...i", gbar_inv, dinv)
    lap = sum(np.gradient(flux[..., i], h, axis=i) for i in range(n)) / vol
    good = grid.interior.copy()
    for ax in range(n):
        for s in (1, 2):
            good &= np.roll(grid.interior, s, ax) & np.roll(grid.interior, -s, ax)
    for arr in (inv_v, h2, lap):
        arr[~good] = np.nan
    return dict(inv_v=inv_v, h2=h2, lap_inv_v=lap, vol=vol, gbar_inv=gbar_inv, good=good)


def stretch_subharmonic_defect(sol: GraphSolution, kappa):
    """(1 - 1/(3(n-1))) |h|^2/v + Lap_G(1/v) - kappa^2/v on interior nodes (NaN near edges)."""
    n = sol.grid.dim
    f = graph_geometry_fields(sol)
    c = 1 - 1 / (3 * (n - 1))
    out = c * f["h2"] * f["inv_v"] + f["lap_inv_v"] - kappa ** 2 * f["inv_v"]
    return out[sol.grid.interior]


def graph_stability_margins(sol: GraphSolution, kappa, trials=20, seed=0):
    """Margins of the graph stability inequality for random bump tests.

    Each test function is a smooth bump compactly supported in Omega;
    returns RHS - LHS of (1 - 1/(3(n-1))) int |h|^2 phi^2 <= int |grad phi|^2
    + kappa^2 int phi^2, integrated over the graph.
    """
    grid = sol.grid
    n, h = grid.dim, grid.h
    f = graph_geometry_fields(sol)
    good = f["good"] & np.isfinite(f["h2"])
    pts = grid.points
    rng = np.random.default_rng(seed)
    cand = np.argwhere(good)
    c = 1 - 1 / (3 * (n - 1))
    margins = []
    for _ in range(trials):
        center = pts[tuple(cand[rng.integers(len(cand))])]
        radius = rng.uniform(4, 12) * h
        r2 = np.sum((pts - center) ** 2, axis=-1) / radius ** 2
        phi = np.where(r2 < 1, (1 - r2) ** 2, 0.0) * good
        dphi = np.stack(np.gradient(phi, h), axis=-1)
        grad2 = np.einsum("...i,...ij,...j->...", dphi, f["gbar_inv"], dphi)
        dA = f["vol"] * h ** n
        lhs = c * np.nansum(np.where(good, f["h2"], 0) * phi ** 2 * dA)
        rhs = np.sum(grad2 * dA) + kappa ** 2 * np.sum(phi ** 2 * dA)
        margins.append(rhs - lhs)
    return np.array(margins)
