"""Level-set geometry on uniform grids.

For a level-set function F the unit normal field is nu^i = g^{ij} d_j F / |dF|_g
and the mean curvature of the level set through a point is div_g nu. Both
are computed with centred differences on the grid and sampled at arbitrary
points by multilinear interpolation.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage import measure

from .initial_data import christoffel


def grid_data(grid, ids):
    """Metric fields on every grid node (cached on the grid object)."""
    cache = getattr(grid, "_metric_cache", None)
    if cache is not None and cache[0] is ids:
        return cache[1]
    pts = grid.points
    with np.errstate(all="ignore"):
        g = ids._g(pts)
        bad = ~np.all(np.isfinite(g), axis=(-1, -2))
        g[bad] = np.eye(grid.dim)
        ginv = np.linalg.inv(g)
        sqrtg = np.sqrt(np.linalg.det(g))
    out = dict(g=g, ginv=ginv, sqrtg=sqrtg, bad=bad)
    grid._metric_cache = (ids, out)
    return out


def normal_and_curvature(grid, ids, F):
    """Grid fields (dF, |dF|_g, nu^i, H) for the level sets of F."""
    data = grid_data(grid, ids)
    h = grid.h
    with np.errstate(all="ignore"):
        dF = np.stack(np.gradient(F, h), axis=-1)
        up = np.einsum("...ij,...j->...i", data["ginv"], dF)
        norm = np.sqrt(np.einsum("...i,...i->...", dF, up))
        nu = up / norm[..., None]
        flux = data["sqrtg"][..., None] * nu
        div = sum(np.gradient(flux[..., i], h, axis=i) for i in range(grid.dim))
        H = div / data["sqrtg"]
    return dF, norm, nu, H


def second_fundamental_norm(grid, ids, F):
    """|h|^2 of the level sets of F from the covariant Hessian."""
    data = grid_data(grid, ids)
    h, n = grid.h, grid.dim
    with np.errstate(all="ignore"):
        dF = np.stack(np.gradient(F, h), axis=-1)
        up = np.einsum("...ij,...j->...i", data["ginv"], dF)
        norm = np.sqrt(np.einsum("...i,...i->...", dF, up))
        hess = np.stack([np.stack(np.gradient(dF[..., i], h), axis=-1) for i in range(n)], axis=-2)
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        pts = grid.points
        gam = christoffel(data["g"], ids._dg(pts))
        hess = hess - np.einsum("...kij,...k->...ij", gam, dF)
        nu = up / norm[..., None]
        proj = data["ginv"] - nu[..., :, None] * nu[..., None, :]
        h2 = np.einsum("...ik,...jl,...ij,...kl->...", proj, proj, hess, hess) / norm ** 2
    return h2


def sample(grid, field, points, order=1):
    """Interpolate a grid field (trailing components allowed) at points."""
    coords = ((np.asarray(points) - grid.origin) / grid.h).T
    field = np.asarray(field)
    if field.ndim == grid.dim:
        return ndimage.map_coordinates(field, coords, order=order, mode="nearest")
    flat = field.reshape(field.shape[:grid.dim] + (-1,))
    cols = [ndimage.map_coordinates(flat[..., c], coords, order=order, mode="nearest")
            for c in range(flat.shape[-1])]
    return np.stack(cols, axis=-1).reshape((len(points),) + field.shape[grid.dim:])


def trace_on_surface(ids, points, nu_up):
    """tr_S p = g^{ij} p_ij - p(nu, nu) for unit normals nu (upper index)."""
    g = ids._g(points)
    p = ids._p(points)
    ginv = np.linalg.inv(g)
    return np.einsum("nij,nij->n", ginv, p) - np.einsum("ni,nij,nj->n", nu_up, p, nu_up)


def metric_distance(grid, ids, phi):
    """First-order metric distance phi / |d phi|_g (signed like phi)."""
    data = grid_data(grid, ids)
    with np.errstate(all="ignore"):
        dphi = np.stack(np.gradient(phi, grid.h), axis=-1)
        norm = np.sqrt(np.einsum("...i,...ij,...j->...", dphi, data["ginv"], dphi))
        d = phi / norm
    return np.where(np.isfinite(d), d, phi)


def zero_set(grid, F, mask=None):
    """Marching squares / cubes of F = 0 in physical coordinates.

    Returns (vertices, cells): cells are index pairs (n = 2) or triples
    (n = 3). Loops from find_contours are closed into segment lists.
    """
    F = np.asarray(F, float)
    if grid.dim == 2:
        verts, cells, offset = [], [], 0
        for c in measure.find_contours(F, 0.0, mask=mask):
            closed = np.allclose(c[0], c[-1])
            pts = c[:-1] if closed else c
            k = len(pts)
            if k < 3:
                continue
            idx = np.arange(k) + offset
            seg = np.column_stack([idx, np.roll(idx, -1)]) if closed else \
                np.column_stack([idx[:-1], idx[1:]])
            verts.append(pts)
            cells.append(seg)
            offset += k
        if not verts:
            return np.zeros((0, 2)), np.zeros((0, 2), int)
        v = np.concatenate(verts) * grid.h + grid.origin
        return v, np.concatenate(cells)
    if not (np.nanmin(F) < 0 < np.nanmax(F)):
        return np.zeros((0, 3)), np.zeros((0, 3), int)
    v, f, _, _ = measure.marching_cubes(F, 0.0, spacing=(grid.h,) * 3, mask=mask,
                                        allow_degenerate=False)
    return v + grid.origin, f.astype(int)
