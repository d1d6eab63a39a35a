"""Horizon extraction, surface geometry and the verification probes.

The horizon is a cross section of the steep part of a converged graph. For
each blow-down component a level z of u is chosen such that the level set
{u = z} bounding that component satisfies the horizon condition in the
mean; the surface is that level set and its geometry (normal, mean
curvature, second fundamental form) comes from the level-set field u - z.
When no level qualifies the component sits on the inner boundary and the
inner boundary itself is returned for it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from .errors import ExtractionError, GeometryError
from .initial_data import GHOST_INNER, GHOST_OUTER, DomainGrid, InitialDataSet
from .jang_core import GraphSolution, _extended_field
from .levelset import normal_and_curvature, sample, second_fundamental_norm, trace_on_surface, zero_set


# ----------------------------------------------------------------------
# mesh helpers
# ----------------------------------------------------------------------

def vertex_components(cells, count):
    """Connected-component label per vertex."""
    if count == 0:
        return np.zeros(0, int)
    adj = coo_matrix((np.ones(cells.size), (cells.ravel(), np.roll(cells, 1, axis=1).ravel())),
                     shape=(count, count))
    return connected_components(adj, directed=False)[1]


def is_closed(cells, count, dim):
    """True when every vertex (n = 2) or edge (n = 3) is shared exactly twice."""
    if len(cells) == 0:
        return True
    if dim == 2:
        return bool(np.all(np.bincount(cells.ravel(), minlength=count) == 2))
    edges = np.sort(np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def _segments_cross(a0, a1, b0, b1):
    def orient(p, q, r):
        return np.sign((q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0]))
    o1, o2 = orient(a0, a1, b0), orient(a0, a1, b1)
    o3, o4 = orient(b0, b1, a0), orient(b0, b1, a1)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def _triangles_cross(T1, T2):
    """Vectorised segment-against-triangle test in both directions."""
    def seg_tri(p, q, tri):
        e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
        d = q - p
        hvec = np.cross(d, e2)
        a = np.einsum("ij,ij->i", e1, hvec)
        ok = np.abs(a) > 1e-14
        f = np.where(ok, 1 / np.where(ok, a, 1), 0)
        s = p - tri[:, 0]
        u = f * np.einsum("ij,ij->i", s, hvec)
        qv = np.cross(s, e1)
        v = f * np.einsum("ij,ij->i", d, qv)
        w = f * np.einsum("ij,ij->i", e2, qv)
        eps = 1e-9
        return ok & (u > eps) & (v > eps) & (u + v < 1 - eps) & (w > eps) & (w < 1 - eps)
    hit = np.zeros(len(T1), bool)
    for A, B in ((T1, T2), (T2, T1)):
        for i, j in ((0, 1), (1, 2), (2, 0)):
            hit |= seg_tri(A[:, i], A[:, j], B)
    return hit


def is_embedded(vertices, cells, dim):
    """No two non-adjacent elements intersect."""
    if len(cells) < 2:
        return True
    cent = vertices[cells].mean(axis=1)
    lengths = np.linalg.norm(vertices[cells] - cent[:, None, :], axis=-1).max(axis=1)
    tree = cKDTree(cent)
    pairs = tree.query_pairs(2.0 * lengths.max(), output_type="ndarray")
    if len(pairs) == 0:
        return True
    shared = np.zeros(len(pairs), bool)
    for a, b in itertools.product(range(dim), range(dim)):
        shared |= cells[pairs[:, 0], a] == cells[pairs[:, 1], b]
    pairs = pairs[~shared]
    if len(pairs) == 0:
        return True
    A, B = vertices[cells[pairs[:, 0]]], vertices[cells[pairs[:, 1]]]
    if dim == 2:
        return not bool(np.any(_segments_cross(A[:, 0], A[:, 1], B[:, 0], B[:, 1])))
    return not bool(np.any(_triangles_cross(A, B)))


def element_measures(ids: InitialDataSet, vertices, cells):
    """Length (n = 2) or area (n = 3) of every element under g at its centroid."""
    if len(cells) == 0:
        return np.zeros(0)
    corner = vertices[cells]
    g = ids.metric(corner.mean(axis=1))
    E = corner[:, 1:] - corner[:, :1]
    gram = np.einsum("eai,eij,ebj->eab", E, g, E)
    if vertices.shape[1] == 2:
        return np.sqrt(gram[:, 0, 0])
    return 0.5 * np.sqrt(np.maximum(np.linalg.det(gram), 0.0))


def vertex_weights(ids, vertices, cells):
    meas = element_measures(ids, vertices, cells)
    w = np.zeros(len(vertices))
    np.add.at(w, cells.ravel(), np.repeat(meas / cells.shape[1], cells.shape[1]))
    return w


def hausdorff(a, b):
    if len(a) == 0 or len(b) == 0:
        return np.inf
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


# ----------------------------------------------------------------------
# the surface
# ----------------------------------------------------------------------

@dataclass
class HorizonSurface:
    vertices: np.ndarray
    cells: np.ndarray
    dim: int
    normals: np.ndarray = None
    H: np.ndarray = None
    T: np.ndarray = None
    labels: np.ndarray = None
    levels: list = field(default_factory=list)
    method: str = "cross-section"
    coincident: list = field(default_factory=list)
    inside_mask: np.ndarray = field(default=None, repr=False)
    grid: DomainGrid = field(default=None, repr=False)
    sources: list = field(default_factory=list, repr=False)
    area_value: float = float("nan")

    @property
    def component_count(self):
        return 0 if self.labels is None or len(self.labels) == 0 else int(self.labels.max()) + 1

    def component(self, k):
        keep = self.labels == k
        remap = -np.ones(len(self.vertices), int)
        remap[keep] = np.arange(int(keep.sum()))
        cells = self.cells[np.all(keep[self.cells], axis=1)]
        return self.vertices[keep], remap[cells]

    def outer_mask(self):
        """Interior nodes of the outer region between the surface and the outer boundary."""
        return self.grid.interior & ~self.inside_mask

    def radii(self, center=None):
        c = np.zeros(self.dim) if center is None else np.asarray(center, float)
        return np.linalg.norm(self.vertices - c, axis=1)


def _from_pieces(pieces, dim):
    verts, cells, offset = [], [], 0
    for v, c in pieces:
        verts.append(v)
        cells.append(c + offset)
        offset += len(v)
    if not verts:
        return np.zeros((0, dim)), np.zeros((0, dim), int)
    return np.concatenate(verts), np.concatenate(cells)


def _split(vertices, cells):
    labels = vertex_components(cells, len(vertices))
    out = []
    for k in range(labels.max() + 1 if len(labels) else 0):
        keep = labels == k
        remap = -np.ones(len(vertices), int)
        remap[keep] = np.arange(int(keep.sum()))
        out.append((vertices[keep], remap[cells[np.all(keep[cells], axis=1)]]))
    return out


def _fill_field(grid, values, low):
    """Interior values extended by 0 beyond the outer boundary and ``low`` in the holes."""
    full = np.where(grid.phi_outer >= 0, 0.0, low)
    full[grid.interior] = values
    return full


def _piece_region(grid, labels, field_vals, level, verts):
    """Label of the {field < level} region bounded by a contour piece."""
    idx = (verts - grid.origin) / grid.h
    base = np.floor(idx).astype(int)
    found = np.zeros(len(verts), int)
    for corner in itertools.product((0, 1), repeat=grid.dim):
        node = np.clip(base + np.array(corner), 0, np.array(grid.shape) - 1)
        tup = tuple(node.T)
        ok = (found == 0) & (field_vals[tup] < level)
        found[ok] = labels[tup][ok]
    found = found[found > 0]
    if len(found) == 0:
        return 0
    return int(np.bincount(found).argmax())


class _LevelSelector:
    """Evaluates the mean horizon defect of level sets of one graph."""

    def __init__(self, sol: GraphSolution, mode):
        grid, ids = sol.grid, sol.ids
        self.grid, self.ids, self.mode = grid, ids, mode
        self.u = sol.u
        low = float(sol.u.min()) - 1.0
        self.F = _fill_field(grid, sol.u, low)
        self.geom = _extended_field(sol)
        _, norm, nu, H = normal_and_curvature(grid, ids, self.geom)
        self.nu, self.Hgrid, self.norm = nu, H, norm

    def pieces(self, level):
        verts, cells = zero_set(self.grid, self.F - level)
        below, _ = ndimage.label(self.F < level)
        out = []
        for v, c in _split(verts, cells):
            out.append((v, c, _piece_region(self.grid, below, self.F, level, v)))
        return out, below

    def defect(self, verts):
        H = sample(self.grid, self.Hgrid, verts)
        nu = sample(self.grid, self.nu, verts)
        g = self.ids.metric(verts)
        nu = nu / np.sqrt(np.einsum("ni,nij,nj->n", nu, g, nu))[:, None]
        T = trace_on_surface(self.ids, verts, nu)
        return horizon_defect(H, T, self.mode), H, T, nu

    def mean_defect(self, level, component):
        pieces, below = self.pieces(level)
        total, weight = 0.0, 0.0
        chosen = []
        for v, c, lab in pieces:
            if lab == 0 or not np.any(component & (below == lab)):
                continue
            w = vertex_weights(self.ids, v, c)
            d = self.defect(v)[0]
            total += float(np.sum(w * d))
            weight += float(np.sum(w))
            chosen.append((v, c, lab))
        if weight == 0:
            return np.nan, chosen, below
        return total / weight, chosen, below


def horizon_defect(H, T, mode="generalized"):
    """H - |T| (generalized) or H + T (MOTS); zero on a horizon."""
    return H - np.abs(T) if mode == "generalized" else H + T


def _bracket(grid, u, component, rings=3):
    """Levels just off the inner boundary of a component and just inside the outer one."""
    interior = grid.interior
    near_in = ndimage.binary_dilation(grid.mask == GHOST_INNER, iterations=rings) & interior
    near_in &= ndimage.binary_dilation(component, iterations=rings + 1)
    near_out = ndimage.binary_dilation(grid.mask == GHOST_OUTER, iterations=rings) & interior
    full = grid.to_grid(u)
    lo = float(np.nanmax(full[near_in])) if near_in.any() else float(np.nanmin(full[component]))
    hi = float(np.nanmin(full[near_out]))
    return lo, hi


def extract_surface(region, grid: DomainGrid, ids: InitialDataSet, solution: GraphSolution = None,
                    mode="generalized", method=None, iterations=60):
    """Horizon surface bounding the blow-down region.

    With a solution the default method is the cross-section search; with
    only a region mask the interface of the redistanced indicator is used.
    """
    region = np.asarray(region, bool)
    if not region.any():
        raise ExtractionError("blow-down region is empty")
    method = method or ("cross-section" if solution is not None else "threshold")
    if method == "threshold":
        surf = _threshold_surface(region, grid, ids)
    elif method == "cross-section":
        if solution is None:
            raise ExtractionError("cross-section extraction needs the graph solution")
        surf = _cross_section_surface(region, grid, ids, solution, mode, iterations)
    else:
        raise ExtractionError(f"unknown extraction method {method!r}")
    if len(surf.vertices) == 0:
        raise ExtractionError("extracted surface is empty")
    if not is_closed(surf.cells, len(surf.vertices), grid.dim):
        raise ExtractionError("extracted surface is not closed (touches the grid edge?)")
    if not is_embedded(surf.vertices, surf.cells, grid.dim):
        raise ExtractionError("extracted surface self-intersects; refine the grid")
    surface_geometry(surf, ids, mode)
    surf.area_value = area(surf, ids)
    return surf


def redistanced_indicator(mask, h):
    """Signed distance of a node mask (negative inside), one EDT pass."""
    inside = ndimage.distance_transform_edt(mask)
    outside = ndimage.distance_transform_edt(~mask)
    return (outside - inside) * h + np.where(mask, 0.5 * h, -0.5 * h)


def _threshold_surface(region, grid, ids):
    F = redistanced_indicator(region, grid.h)
    v, c = zero_set(grid, F)
    surf = HorizonSurface(v, c, grid.dim, method="threshold", inside_mask=region.copy(), grid=grid)
    surf.labels = vertex_components(c, len(v))
    surf.sources = [(F, np.arange(len(v)))]
    surf.levels = [np.nan] * surf.component_count
    return surf


def _boundary_piece(grid, component):
    """The inner-boundary part touching a blow-down component."""
    best, best_d = None, np.inf
    pts = grid.points[component]
    for part in grid.inner_parts:
        d = float(np.min(sample(grid, part, pts))) if len(pts) else np.inf
        if d < best_d:
            best, best_d = part, d
    return best


def _cross_section_surface(region, grid, ids, sol, mode, iterations):
    sel = _LevelSelector(sol, mode)
    comps, count = ndimage.label(region)
    found = []   # (level, pieces, region mask, field, coincident)
    for k in range(1, count + 1):
        comp = comps == k
        lo, hi = _bracket(grid, sol.u, comp)
        f_lo = sel.mean_defect(lo, comp)[0]
        f_hi = sel.mean_defect(hi, comp)[0]
        if not np.isfinite(f_hi) or f_hi <= 0:
            raise ExtractionError("level sets near the outer boundary are not untrapped")
        if not np.isfinite(f_lo) or f_lo >= 0 or lo >= hi:
            part = _boundary_piece(grid, comp)
            v, c = zero_set(grid, part)
            pieces = [(pv, pc) for pv, pc in _split(v, c)
                      if np.any(comp[tuple(np.clip(np.rint((pv - grid.origin) / grid.h).astype(int), 0,
                                                           np.array(grid.shape) - 1).T)])
                      or hausdorff(pv, grid.points[comp]) < 3 * grid.h]
            # the surface is the boundary itself; comp can reach far past it at finite t
            inside = part <= 0
            found.append((np.nan, pieces, inside, part, True))
            continue
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            f_mid = sel.mean_defect(mid, comp)[0]
            if not np.isfinite(f_mid):
                break
            if f_mid < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12 * max(1.0, abs(mid)):
                break
        level = 0.5 * (lo + hi)
        _, chosen, below = sel.mean_defect(level, comp)
        inside = np.zeros(grid.shape, bool)
        for _, _, lab in chosen:
            inside |= below == lab
        found.append((level, [(v, c) for v, c, _ in chosen], inside, sel.geom - level, False))
    # a component swallowed by another component's region is dropped
    keep = []
    for i, a in enumerate(found):
        covered = any(j != i and np.all(b[2][a[2]]) and (b[2].sum() > a[2].sum() or j < i)
                      for j, b in enumerate(found))
        if not covered:
            keep.append(a)
    pieces, sources, levels, coincident, inside = [], [], [], [], np.zeros(grid.shape, bool)
    start = 0
    for level, pcs, mask, F, coinc in keep:
        v, c = _from_pieces(pcs, grid.dim)
        pieces.append((v, c))
        sources.append((F, np.arange(start, start + len(v))))
        start += len(v)
        levels.append(level)
        coincident.append(coinc)
        inside |= mask
    v, c = _from_pieces(pieces, grid.dim)
    surf = HorizonSurface(v, c, grid.dim, levels=levels, method="cross-section", coincident=coincident,
                          inside_mask=inside & ~(grid.phi_outer >= 0), grid=grid, sources=sources)
    surf.labels = vertex_components(c, len(v))
    return surf


# ----------------------------------------------------------------------
# geometry
# ----------------------------------------------------------------------

def surface_geometry(surf: HorizonSurface, ids: InitialDataSet, mode="generalized"):
    """Per-vertex (H, tr_S p), normal pointing away from the enclosed region."""
    grid = surf.grid
    n = len(surf.vertices)
    H, T = np.zeros(n), np.zeros(n)
    normals = np.zeros((n, surf.dim))
    for F, idx in surf.sources:
        if len(idx) == 0:
            continue
        _, norm, nu, Hg = normal_and_curvature(grid, ids, F)
        pts = surf.vertices[idx]
        grad = sample(grid, norm, pts)
        if np.any(grad < 0.5 * np.nanmedian(grad)) or not np.all(np.isfinite(grad)):
            raise GeometryError("degenerate level-set normal on the surface")
        v = sample(grid, nu, pts)
        g = ids.metric(pts)
        v = v / np.sqrt(np.einsum("ni,nij,nj->n", v, g, v))[:, None]
        normals[idx] = v
        H[idx] = sample(grid, Hg, pts)
        T[idx] = trace_on_surface(ids, pts, v)
    surf.normals, surf.H, surf.T = normals, H, T
    return H, T


def horizon_residual(surf: HorizonSurface, ids=None, mode="generalized"):
    if surf.H is None:
        surface_geometry(surf, ids, mode)
    if len(surf.H) == 0:
        return 0.0
    return float(np.max(np.abs(horizon_defect(surf.H, surf.T, mode))))


def area(surf: HorizonSurface, ids: InitialDataSet):
    return float(np.sum(element_measures(ids, surf.vertices, surf.cells)))


def second_fundamental_samples(surf: HorizonSurface, ids):
    out = np.zeros(len(surf.vertices))
    for F, idx in surf.sources:
        if len(idx):
            out[idx] = sample(surf.grid, second_fundamental_norm(surf.grid, ids, F), surf.vertices[idx])
    return out


def _euclidean_normals(surf, ids):
    g = ids.metric(surf.vertices)
    low = np.einsum("nij,nj->ni", g, surf.normals)
    return low / np.linalg.norm(low, axis=1)[:, None]


# ----------------------------------------------------------------------
# probes
# ----------------------------------------------------------------------

@dataclass
class ProbeReport:
    base_area: float
    bump_areas: np.ndarray
    seeds: list
    sweep_areas: np.ndarray
    tolerance: float

    @property
    def min_margin(self):
        m = np.concatenate([self.bump_areas, self.sweep_areas]) - self.base_area
        return float(m.min()) if len(m) else 0.0

    @property
    def failures(self):
        bad = self.bump_areas < self.base_area - self.tolerance
        return [s for s, b in zip(self.seeds, bad) if b]

    @property
    def passed(self):
        return not self.failures and bool(np.all(self.sweep_areas >= self.base_area - self.tolerance))


def outer_minimizing_probe(surf: HorizonSurface, ids: InitialDataSet, trials=50, seed=0,
                           rel_tol=1e-3, amplitude=None, sweep_field=None, sweep_levels=8):
    """Areas of outward bump perturbations and of an outward level-set sweep.

    ``sweep_field`` is the graph u on interior nodes; its level sets above
    the surface level form the sweep.

    Bumps are smooth, radially symmetric in the ambient coordinates, with
    amplitude in (0, 5h] and support radius between 4h and half the
    surface diameter.
    """
    h = surf.grid.h
    amplitude = 5 * h if amplitude is None else amplitude
    base = area(surf, ids)
    tol = rel_tol * base
    nrm = _euclidean_normals(surf, ids)
    diam = float(np.max(np.ptp(surf.vertices, axis=0))) if len(surf.vertices) else 0.0
    areas, seeds = [], []
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        centre = surf.vertices[rng.integers(len(surf.vertices))]
        radius = rng.uniform(4 * h, max(4 * h, 0.5 * diam))
        amp = rng.uniform(0, 1) * amplitude
        r2 = np.sum((surf.vertices - centre) ** 2, axis=1) / radius ** 2
        bump = np.where(r2 < 1, (1 - r2) ** 2, 0.0) * amp
        moved = surf.vertices + bump[:, None] * nrm
        areas.append(float(np.sum(element_measures(ids, moved, surf.cells))))
        seeds.append(seed + k)
    sweep = []
    if sweep_field is not None and surf.levels and np.all(np.isfinite(surf.levels)):
        # level sets of the graph between the surface and the outer boundary
        grid = surf.grid
        full = _fill_field(grid, sweep_field, float(np.min(sweep_field)) - 1.0)
        stop = _bracket(grid, sweep_field, grid.interior)[1]
        for z in np.linspace(max(surf.levels), stop, sweep_levels + 2)[1:-1]:
            v, c = zero_set(grid, full - z)
            sweep.append(float(np.sum(element_measures(ids, v, c))))
    return ProbeReport(base, np.array(areas), seeds, np.array(sweep), tol)


def _test_function(rng, pts, scale):
    """Random smooth function: a constant plus a few plane waves."""
    val = np.full(len(pts), rng.normal())
    for _ in range(4):
        k = rng.normal(size=pts.shape[1]) * rng.uniform(0.5, 4.0) / scale
        val += rng.normal() * np.cos(pts @ k + rng.uniform(0, 2 * np.pi))
    return val


def _dirichlet_and_mass(ids, vertices, cells, f, weight):
    """(int |grad f|^2, int f^2, int weight f^2) with P1 elements."""
    corner = vertices[cells]
    g = ids.metric(corner.mean(axis=1))
    E = corner[:, 1:] - corner[:, :1]
    gram = np.einsum("eai,eij,ebj->eab", E, g, E)
    df = f[cells[:, 1:]] - f[cells[:, :1]]
    if vertices.shape[1] == 2:
        meas = np.sqrt(gram[:, 0, 0])
        grad2 = df[:, 0] ** 2 / gram[:, 0, 0]
    else:
        meas = 0.5 * np.sqrt(np.maximum(np.linalg.det(gram), 0.0))
        grad2 = np.einsum("ea,eab,eb->e", df, np.linalg.inv(gram), df)
    f2 = np.mean(f[cells] ** 2, axis=1)
    wf2 = np.mean(weight[cells] * f[cells] ** 2, axis=1)
    return float(np.sum(meas * grad2)), float(np.sum(meas * f2)), float(np.sum(meas * wf2))


@dataclass
class StabilityReport:
    margins: np.ndarray
    kappa2: float
    area: float

    @property
    def min_margin(self):
        return float(self.margins.min())

    @property
    def normalized(self):
        return self.min_margin / (self.kappa2 * self.area)


def stability_probe(surf: HorizonSurface, ids: InitialDataSet, kappa2, trials=100, seed=0):
    """Margins of int|grad f|^2 + kappa^2 int f^2 - (1 - 1/(3(n-1))) int |h|^2 f^2."""
    n = surf.dim
    c = 1 - 1 / (3 * (n - 1))
    h2 = second_fundamental_samples(surf, ids)
    scale = float(np.max(np.ptp(surf.vertices, axis=0)))
    rng = np.random.default_rng(seed)
    margins = []
    for _ in range(trials):
        f = _test_function(rng, surf.vertices, scale)
        grad, mass, curv = _dirichlet_and_mass(ids, surf.vertices, surf.cells, f, h2)
        margins.append(grad + kappa2 * mass - c * curv)
    return StabilityReport(np.array(margins), float(kappa2), area(surf, ids))


def coincidence_check(surf: HorizonSurface, grid: DomainGrid = None, tol=None):
    """Per surface component: 'coincident', 'disjoint' or 'anomaly'."""
    grid = grid or surf.grid
    tol = 2 * grid.h if tol is None else tol
    boundaries = [zero_set(grid, part)[0] for part in grid.inner_parts]
    flags = []
    for k in range(surf.component_count):
        v, _ = surf.component(k)
        close = 0
        touching = False
        for b in boundaries:
            if len(b) == 0:
                continue
            if hausdorff(v, b) <= tol:
                close += 1
            elif np.min(cKDTree(b).query(v)[0]) <= tol:
                touching = True
        if close == 1 and not touching:
            flags.append("coincident")
        elif close == 0 and not touching:
            flags.append("disjoint")
        else:
            flags.append("anomaly")
    return flags


# ----------------------------------------------------------------------
# report and mesh files
# ----------------------------------------------------------------------

@dataclass
class VerificationReport:
    residual: float
    residual_tol: float
    area: float
    probes: ProbeReport
    stability: StabilityReport
    coincidence: list
    sup_mean_curvature: float
    curvature_bound: float
    radius_range: tuple = (np.nan, np.nan)

    @property
    def passed(self):
        return (self.residual <= self.residual_tol and self.probes.passed
                and self.stability.min_margin >= -0.05 * self.stability.kappa2 * self.area
                and self.sup_mean_curvature <= self.curvature_bound)

    def items(self):
        s = self.stability
        return [
            ("horizon_residual", f"{self.residual:.6g}", f"<= {self.residual_tol:.6g}"),
            ("area", f"{self.area:.8g}", ""),
            ("radius_min", f"{self.radius_range[0]:.6g}", ""),
            ("radius_max", f"{self.radius_range[1]:.6g}", ""),
            ("outer_min_probes", str(len(self.probes.bump_areas)), ""),
            ("outer_min_margin", f"{self.probes.min_margin:.6g}", f">= {-self.probes.tolerance:.6g}"),
            ("outer_min_failures", " ".join(map(str, self.probes.failures)) or "none", ""),
            ("stability_trials", str(len(s.margins)), ""),
            ("stability_margin", f"{s.min_margin:.6g}", f">= {-0.05 * s.kappa2 * s.area:.6g}"),
            ("kappa_squared", f"{s.kappa2:.6g}", ""),
            ("coincidence", " ".join(self.coincidence) or "none", ""),
            ("sup_mean_curvature", f"{self.sup_mean_curvature:.6g}", f"<= {self.curvature_bound:.6g}"),
            ("passed", str(self.passed).lower(), ""),
        ]

    def to_text(self):
        lines = []
        for key, val, tol in self.items():
            lines.append(f"{key} = {val}" + (f"    # tolerance {tol}" if tol else ""))
        return "\n".join(lines) + "\n"


def verify_surface(surf: HorizonSurface, ids: InitialDataSet, C, kappa2, mode="generalized",
                   residual_tol=None, probe_trials=50, stability_trials=100, seed=0, sweep_field=None):
    residual_tol = 2 * surf.grid.h if residual_tol is None else residual_tol
    res = horizon_residual(surf, ids, mode)
    probes = outer_minimizing_probe(surf, ids, probe_trials, seed, sweep_field=sweep_field)
    stab = stability_probe(surf, ids, kappa2, stability_trials, seed)
    flags = coincidence_check(surf)
    r = surf.radii()
    return VerificationReport(res, residual_tol, area(surf, ids), probes, stab, flags,
                              float(np.max(np.abs(surf.H))), 2 * C, (float(r.min()), float(r.max())))


def write_mesh(path, surf_or_vertices, cells=None):
    """ASCII polyline (n = 2, loops separated by blank lines) or triangle mesh (n = 3)."""
    if cells is None:
        vertices, cells = surf_or_vertices.vertices, surf_or_vertices.cells
    else:
        vertices = surf_or_vertices
    dim = vertices.shape[1]
    with open(path, "w") as fh:
        if dim == 2:
            for loop in _loops(vertices, cells):
                for i in loop:
                    fh.write(f"{vertices[i, 0]:.10g} {vertices[i, 1]:.10g}\n")
                fh.write("\n")
        else:
            fh.write(f"{len(vertices)} {len(cells)}\n")
            for v in vertices:
                fh.write(f"{v[0]:.10g} {v[1]:.10g} {v[2]:.10g}\n")
            for c in cells:
                fh.write(f"{c[0]} {c[1]} {c[2]}\n")


def _loops(vertices, cells):
    nxt = {int(a): int(b) for a, b in cells}
    seen, loops = set(), []
    for start in nxt:
        if start in seen:
            continue
        loop, i = [], start
        while i not in seen and i in nxt:
            seen.add(i)
            loop.append(i)
            i = nxt[i]
        loops.append(loop)
    return loops


def read_mesh(path):
    """Inverse of write_mesh; the dimension is detected from the layout."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    first = lines[0].split()
    # a triangle mesh starts with an integer header followed by 3-column rows;
    # a polyline vertex such as "1 0" has the same header shape
    second = lines[1].split() if len(lines) > 1 else []
    if len(first) == 2 and all(t.isdigit() for t in first) and len(second) != 2:
        nv, nf = map(int, first)
        body = [ln.split() for ln in lines[1:] if ln.strip()]
        if len(body) < nv + nf:
            raise GeometryError("truncated triangle mesh")
        verts = np.array(body[:nv], float)
        cells = np.array(body[nv:nv + nf], int)
        return verts, cells
    verts, cells, loop = [], [], []
    for ln in lines + [""]:
        if ln.strip():
            loop.append([float(x) for x in ln.split()])
            continue
        if loop:
            start = len(verts)
            verts.extend(loop)
            idx = np.arange(start, start + len(loop))
            cells.extend(np.column_stack([idx, np.roll(idx, -1)]).tolist())
            loop = []
    if not verts:
        raise GeometryError("empty polyline file")
    return np.array(verts, float), np.array(cells, int)


def surface_from_mesh(vertices, cells, grid, ids, mode="generalized"):
    """Rebuild a HorizonSurface from a mesh, with geometry from the distance to the mesh."""
    dim = vertices.shape[1]
    inside = mesh_inside_mask(grid, vertices, cells)
    F = mesh_signed_distance(grid, vertices, cells, inside)
    surf = HorizonSurface(vertices, cells, dim, method="mesh", inside_mask=inside, grid=grid,
                          sources=[(F, np.arange(len(vertices)))])
    surf.labels = vertex_components(cells, len(vertices))
    surf.levels = [np.nan] * surf.component_count
    surface_geometry(surf, ids, mode)
    surf.area_value = area(surf, ids)
    return surf


def _densify(vertices, cells, spacing):
    """Points on the mesh no farther apart than ``spacing``, with their element index."""
    corner = vertices[cells]
    longest = np.max(np.linalg.norm(corner - np.roll(corner, 1, axis=1), axis=-1))
    k = max(1, int(np.ceil(longest / spacing)))
    if vertices.shape[1] == 2:
        s = np.linspace(0, 1, k + 1)[:-1]
        pts = corner[:, None, 0] * (1 - s)[None, :, None] + corner[:, None, 1] * s[None, :, None]
    else:
        a, b = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        keep = a + b <= k
        l1, l2 = a[keep] / k, b[keep] / k
        l0 = 1 - l1 - l2
        pts = (corner[:, None, 0] * l0[None, :, None] + corner[:, None, 1] * l1[None, :, None]
               + corner[:, None, 2] * l2[None, :, None])
    owner = np.repeat(np.arange(len(cells)), pts.shape[1])
    return pts.reshape(-1, vertices.shape[1]), owner


def _segment_distance(x, a, b):
    d = b - a
    s = np.clip(np.einsum("ni,ni->n", x - a, d) / np.maximum(np.einsum("ni,ni->n", d, d), 1e-300), 0, 1)
    return np.linalg.norm(x - a - s[:, None] * d, axis=1)


def _triangle_distance(x, a, b, c):
    e1, e2 = b - a, c - a
    nrm = np.cross(e1, e2)
    nn = np.maximum(np.einsum("ni,ni->n", nrm, nrm), 1e-300)
    w = x - a
    # barycentric coordinates of the projection onto the plane
    l1 = np.einsum("ni,ni->n", np.cross(w, e2), nrm) / nn
    l2 = np.einsum("ni,ni->n", np.cross(e1, w), nrm) / nn
    inside = (l1 >= 0) & (l2 >= 0) & (l1 + l2 <= 1)
    plane = np.abs(np.einsum("ni,ni->n", w, nrm)) / np.sqrt(nn)
    edges = np.minimum(np.minimum(_segment_distance(x, a, b), _segment_distance(x, b, c)),
                       _segment_distance(x, c, a))
    return np.where(inside, plane, edges)


def mesh_distance(points, vertices, cells, spacing, candidates=8):
    """Exact Euclidean distance from each point to a polyline or triangle mesh.

    A k-d tree over sample points picks candidate elements; the distance to
    those elements is then computed exactly, so the field is smooth off the mesh.
    """
    vertices, cells = np.asarray(vertices, float), np.asarray(cells, int)
    samples, owner = _densify(vertices, cells, spacing)
    k = min(candidates, len(samples))
    _, near = cKDTree(samples).query(points, k=k)
    near = np.asarray(near).reshape(len(points), k)
    best = np.full(len(points), np.inf)
    for j in range(k):
        elem = cells[owner[near[:, j]]]
        corner = vertices[elem]
        if vertices.shape[1] == 2:
            d = _segment_distance(points, corner[:, 0], corner[:, 1])
        else:
            d = _triangle_distance(points, corner[:, 0], corner[:, 1], corner[:, 2])
        best = np.minimum(best, d)
    return best


def mesh_signed_distance(grid, vertices, cells, enclosed):
    """Euclidean distance to the mesh, negative on ``enclosed`` nodes."""
    dist = mesh_distance(grid.points.reshape(-1, grid.dim), vertices, cells, grid.h / 4)
    dist = np.maximum(dist.reshape(grid.shape), 1e-9 * grid.h)
    return np.where(enclosed, -dist, dist)


def mesh_inside_mask(grid, vertices, cells):
    """Grid nodes enclosed by a closed mesh (ray parity along the first axis)."""
    pts = grid.points.reshape(-1, grid.dim)
    if grid.dim == 2:
        from shapely import contains_xy
        from shapely.geometry import Polygon

        inside = np.zeros(len(pts), bool)
        for loop in _loops(vertices, cells):
            if len(loop) >= 3:
                inside ^= contains_xy(Polygon(vertices[loop]), pts[:, 0], pts[:, 1])
        return inside.reshape(grid.shape)
    # 3D: parity of crossings of the +x ray
    tri = vertices[cells]
    count = np.zeros(len(pts), int)
    yz = pts[:, 1:]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    for k in range(len(tri)):
        lo = np.minimum(np.minimum(a[k, 1:], b[k, 1:]), c[k, 1:])
        hi = np.maximum(np.maximum(a[k, 1:], b[k, 1:]), c[k, 1:])
        cand = np.flatnonzero(np.all((yz >= lo) & (yz < hi), axis=1))
        if len(cand) == 0:
            continue
        p = yz[cand]
        v0, v1, v2 = a[k, 1:], b[k, 1:], c[k, 1:]
        det = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1])
        if abs(det) < 1e-300:
            continue
        l1 = ((p[:, 0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (p[:, 1] - v0[1])) / det
        l2 = ((v1[0] - v0[0]) * (p[:, 1] - v0[1]) - (p[:, 0] - v0[0]) * (v1[1] - v0[1])) / det
        ok = (l1 >= 0) & (l2 >= 0) & (l1 + l2 < 1)
        x = a[k, 0] + l1 * (b[k, 0] - a[k, 0]) + l2 * (c[k, 0] - a[k, 0])
        hit = ok & (x > pts[cand, 0])
        count[cand[hit]] += 1
    return (count % 2 == 1).reshape(grid.shape)
