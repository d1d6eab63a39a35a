"""Initial data sets (g, p), analytic families, gridded ingestion and domains.

Every evaluator is vectorised: points have shape (..., n) and the returned
tensors have shape (..., n, n) for g and p and (..., n, n, n) for their
first derivatives, indexed as d[..., k, i, j] = d_k T_ij.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .errors import DataError, DomainError, GeometryError, ParseError


# ---------------------------------------------------------------------------
# data sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticFamily:
    """Tag and parameters of a closed-form data family."""

    tag: str
    params: dict = field(default_factory=dict)
    sign: int = 1

    def __post_init__(self):
        for key in ("m", "m1", "m2", "separation"):
            if key in self.params and not self.params[key] > 0:
                raise DataError(f"family parameter {key} must be positive")


class InitialDataSet:
    """A pair (g, p) on a box in R^n given by vectorised evaluators."""

    def __init__(self, dim, metric, dmetric, tensor, dtensor, box,
                 family: AnalyticFamily | None = None, singular_points=()):
        if not 2 <= dim <= 7:
            raise DataError(f"dimension {dim} outside 2..7")
        self.dim = int(dim)
        self._g, self._dg, self._p, self._dp = metric, dmetric, tensor, dtensor
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        self.box = (np.broadcast_to(lo, (dim,)).copy(), np.broadcast_to(hi, (dim,)).copy())
        self.family = family
        self.singular_points = [np.asarray(c, float) for c in singular_points]
        self._sup_cache = None

    def _check_points(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DomainError(f"points must have trailing dimension {self.dim}")
        lo, hi = self.box
        slack = 1e-12 * (1 + np.abs(hi - lo))
        if np.any(x < lo - slack) or np.any(x > hi + slack):
            raise DomainError("point outside the declared bounding box")
        return x

    def metric(self, x):
        return self._g(self._check_points(x))

    def dmetric(self, x):
        return self._dg(self._check_points(x))

    def tensor(self, x):
        return self._p(self._check_points(x))

    def dtensor(self, x):
        return self._dp(self._check_points(x))

    def sup_norms(self, x=None, samples_per_axis=None):
        """Return (|p|_C0, |p|_C1, |Ric|_C0) maximised over sample points.

        Norms are taken with respect to g: |p| is the largest absolute
        eigenvalue of g^-1 p, |dp| the g-norm of the derivative tensor.
        Without explicit points the bounding box is sampled on a lattice,
        skipping a small ball around any declared singular point.
        """
        if x is None:
            if self._sup_cache is not None:
                return self._sup_cache
            k = samples_per_axis or (41 if self.dim == 2 else 17)
            axes = [np.linspace(a, b, k) for a, b in zip(*self.box)]
            x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
            keep = np.ones(len(x), bool)
            width = np.min(self.box[1] - self.box[0])
            for c in self.singular_points:
                keep &= np.linalg.norm(x - c, axis=1) > 0.05 * width
            result = tensor_sup_norms(self, x[keep])
            self._sup_cache = result
            return result
        return tensor_sup_norms(self, np.asarray(x, float).reshape(-1, self.dim))


def evaluate_data(ids: InitialDataSet, x):
    """Return (g, dg, p) at x after checking symmetry and definiteness."""
    g = ids.metric(x)
    dg = ids.dmetric(x)
    p = ids.tensor(x)
    if not np.all(np.isfinite(g)) or not np.all(np.isfinite(p)):
        raise DataError("non-finite data value")
    if np.any(np.linalg.eigvalsh(g)[..., 0] <= 0):
        raise DataError("metric is not positive definite")
    return g, dg, p


def tensor_sup_norms(ids: InitialDataSet, x):
    g = ids._g(x)
    p = ids._p(x)
    dp = ids._dp(x)
    ginv = np.linalg.inv(g)
    # eigenvalues of g^-1 p via the symmetric form L^-1 p L^-T
    chol = np.linalg.cholesky(g)
    linv = np.linalg.inv(chol)
    sym = linv @ p @ np.swapaxes(linv, -1, -2)
    p0 = np.max(np.abs(np.linalg.eigvalsh(sym)), axis=-1)
    dp_norm = np.sqrt(np.einsum("...ka,...ib,...jc,...kij,...abc->...", ginv, ginv, ginv, dp, dp))
    ric = ricci_tensor(ids, x)
    ric_norm = np.sqrt(np.abs(np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, ric, ric)))
    return float(np.max(p0)), float(np.max(dp_norm)), float(np.max(ric_norm))


def christoffel(g, dg):
    """Second-kind symbols Gamma[..., k, i, j] = Gamma^k_ij."""
    ginv = np.linalg.inv(g)
    # lower[..., l, i, j] = 0.5 (d_i g_lj + d_j g_li - d_l g_ij)
    lower = 0.5 * (np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg)
    return np.einsum("...kl,...lij->...kij", ginv, lower)


def ricci_tensor(ids: InitialDataSet, x, step=1e-4):
    """Ricci tensor from analytic dg and central differences of Gamma."""
    x = np.asarray(x, float)
    n = ids.dim
    gam = christoffel(ids._g(x), ids._dg(x))
    dgam = np.empty(x.shape[:-1] + (n, n, n, n))  # [..., a, k, i, j] = d_a Gamma^k_ij
    for a in range(n):
        shift = np.zeros(n)
        shift[a] = step
        gp = christoffel(ids._g(x + shift), ids._dg(x + shift))
        gm = christoffel(ids._g(x - shift), ids._dg(x - shift))
        dgam[..., a, :, :, :] = (gp - gm) / (2 * step)
    term1 = np.einsum("...kkij->...ij", dgam)
    term2 = np.einsum("...jkik->...ij", dgam)
    term3 = np.einsum("...kkl,...lij->...ij", gam, gam)
    term4 = np.einsum("...kjl,...lik->...ij", gam, gam)
    return term1 - term2 + term3 - term4


# ---------------------------------------------------------------------------
# analytic families
# ---------------------------------------------------------------------------

def _default_box(dim, half_width):
    return (-half_width * np.ones(dim), half_width * np.ones(dim))


def _eye(x, dim):
    return np.broadcast_to(np.eye(dim), x.shape[:-1] + (dim, dim)).copy()


def _zeros3(x, dim):
    return np.zeros(x.shape[:-1] + (dim, dim, dim))


def flat(dim=3, half_width=10.0):
    """Euclidean metric with p = 0."""
    return InitialDataSet(
        dim,
        lambda x: _eye(x, dim),
        lambda x: _zeros3(x, dim),
        lambda x: np.zeros(x.shape[:-1] + (dim, dim)),
        lambda x: _zeros3(x, dim),
        _default_box(dim, half_width),
        AnalyticFamily("flat"),
    )


def conformally_flat(psi: Callable, dpsi: Callable, dim=3, half_width=10.0,
                     tensor=None, dtensor=None, family=None, singular_points=()):
    """Metric psi^4 delta; p defaults to zero.

    psi(x) returns shape (...), dpsi(x) returns shape (..., n).
    """
    def g(x):
        return psi(x)[..., None, None] ** 4 * _eye(x, dim)

    def dg(x):
        f = 4 * psi(x) ** 3
        grad = dpsi(x) * f[..., None]
        return grad[..., :, None, None] * _eye(x, dim)[..., None, :, :]

    if tensor is None:
        tensor = lambda x: np.zeros(x.shape[:-1] + (dim, dim))
        dtensor = lambda x: _zeros3(x, dim)
    family = family or AnalyticFamily("conformally-flat-custom")
    return InitialDataSet(dim, g, dg, tensor, dtensor, _default_box(dim, half_width),
                          family, singular_points)


def _point_mass_psi(centers, masses):
    centers = [np.asarray(c, float) for c in centers]

    def psi(x):
        out = np.ones(x.shape[:-1])
        for c, m in zip(centers, masses):
            out = out + m / (2 * np.linalg.norm(x - c, axis=-1))
        return out

    def dpsi(x):
        out = np.zeros(x.shape)
        for c, m in zip(centers, masses):
            d = x - c
            r = np.linalg.norm(d, axis=-1)
            out = out - (m / 2) * d / r[..., None] ** 3
        return out

    return psi, dpsi


def isotropic_schwarzschild(m=1.0, dim=3, half_width=10.0):
    """Time-symmetric Schwarzschild slice, g = (1 + m/2r)^4 delta, p = 0."""
    fam = AnalyticFamily("isotropic-schwarzschild", {"m": m})
    psi, dpsi = _point_mass_psi([np.zeros(dim)], [m])
    return conformally_flat(psi, dpsi, dim, half_width, family=fam,
                            singular_points=[np.zeros(dim)])


def brill_lindquist(m1=1.0, m2=1.0, separation=4.0, dim=3, half_width=10.0):
    """Two point masses on the first axis, symmetric about the origin."""
    fam = AnalyticFamily("brill-lindquist", {"m1": m1, "m2": m2, "separation": separation})
    c1 = np.zeros(dim)
    c1[0] = -separation / 2
    c2 = -c1
    psi, dpsi = _point_mass_psi([c1, c2], [m1, m2])
    return conformally_flat(psi, dpsi, dim, half_width, family=fam, singular_points=[c1, c2])


def pg_tensor(x, m, sign, center=None):
    """PG-type extrinsic tensor and its derivative about one center."""
    dim = x.shape[-1]
    if center is not None:
        x = x - center
    r = np.linalg.norm(x, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):   # singular at the center
        amp = sign * np.sqrt(2 * m / r ** 3)
        unit = x / r[..., None]
        eye = np.eye(dim)
        nn = unit[..., :, None] * unit[..., None, :]
        p = amp[..., None, None] * (eye - 1.5 * nn)
        # d_k p_ij with amp' = -1.5 amp / r and d_k n_i = (delta_ik - n_i n_k) / r
        damp = (-1.5 * amp / r)[..., None] * unit
        dn = (eye - nn) / r[..., None, None]            # [..., k, i]
        dnn = dn[..., :, :, None] * unit[..., None, None, :] + dn[..., :, None, :] * unit[..., None, :, None]
        dp = damp[..., :, None, None] * (eye - 1.5 * nn)[..., None, :, :] \
            - 1.5 * amp[..., None, None, None] * dnn
        return p, dp


def painleve_gullstrand(m=1.0, dim=3, half_width=10.0, sign=-1):
    """Flat metric with the PG extrinsic curvature; sign = -1 is ingoing."""
    fam = AnalyticFamily("painleve-gullstrand", {"m": m}, sign=sign)
    return InitialDataSet(
        dim,
        lambda x: _eye(x, dim),
        lambda x: _zeros3(x, dim),
        lambda x: pg_tensor(x, m, sign)[0],
        lambda x: pg_tensor(x, m, sign)[1],
        _default_box(dim, half_width),
        fam,
        singular_points=[np.zeros(dim)],
    )


def pg_superposition(centers, masses, dim=2, half_width=10.0, sign=-1):
    """Flat metric with a sum of PG-type tensors about several centers."""
    centers = [np.asarray(c, float) for c in centers]

    def both(x):
        p = np.zeros(x.shape[:-1] + (dim, dim))
        dp = np.zeros(x.shape[:-1] + (dim, dim, dim))
        for c, m in zip(centers, masses):
            a, b = pg_tensor(x, m, sign, c)
            p += a
            dp += b
        return p, dp

    fam = AnalyticFamily("conformally-flat-custom",
                         {"centers": [tuple(c) for c in centers], "masses": list(masses)}, sign)
    return conformally_flat(lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros(x.shape), dim,
                            half_width, lambda x: both(x)[0], lambda x: both(x)[1], fam, centers)


FAMILIES = {
    "flat": flat,
    "isotropic-schwarzschild": isotropic_schwarzschild,
    "painleve-gullstrand": painleve_gullstrand,
    "brill-lindquist": brill_lindquist,
}
FAMILY_ALIASES = {"pg": "painleve-gullstrand", "schwarzschild": "isotropic-schwarzschild",
                  "iso": "isotropic-schwarzschild", "bl": "brill-lindquist"}


def make_family(tag, dim=3, half_width=10.0, **params):
    tag = FAMILY_ALIASES.get(tag, tag)
    if tag not in FAMILIES:
        raise DataError(f"unknown family {tag!r}")
    return FAMILIES[tag](dim=dim, half_width=half_width, **params)


# ---------------------------------------------------------------------------
# IDSGRID1 files
# ---------------------------------------------------------------------------

def _packed_index(dim):
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def _unpack(values, dim):
    out = np.empty(values.shape[:-1] + (dim, dim))
    for k, (i, j) in enumerate(_packed_index(dim)):
        out[..., i, j] = values[..., k]
        out[..., j, i] = values[..., k]
    return out


class GriddedData(InitialDataSet):
    """Initial data interpolated multilinearly from node samples."""

    def __init__(self, origin, spacing, g_nodes, p_nodes):
        dim = g_nodes.ndim - 2
        shape = g_nodes.shape[:dim]
        origin = np.asarray(origin, float)
        axes = [origin[k] + spacing * np.arange(shape[k]) for k in range(dim)]
        dg_nodes = np.stack(np.gradient(g_nodes, spacing, axis=tuple(range(dim)), edge_order=2), axis=dim)
        dp_nodes = np.stack(np.gradient(p_nodes, spacing, axis=tuple(range(dim)), edge_order=2), axis=dim)
        self.node_metric, self.node_tensor = g_nodes, p_nodes
        self.spacing, self.origin = spacing, origin

        def interp(data):
            f = RegularGridInterpolator(axes, data, method="linear")
            return lambda x: f(x.reshape(-1, dim)).reshape(x.shape[:-1] + data.shape[dim:])

        box = (origin, origin + spacing * (np.array(shape) - 1))
        super().__init__(dim, interp(g_nodes), interp(dg_nodes), interp(p_nodes), interp(dp_nodes),
                         box, AnalyticFamily("gridded"))


def load_grid_file(path) -> GriddedData:
    """Read an IDSGRID1 file.

    Node lines carry either the packed upper triangles (n(n+1)/2 numbers
    for g then for p) or full row-major matrices (n^2 numbers each); the
    full form is checked for symmetry.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    header, pos = {}, 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise ParseError(f"{path}: unexpected end of file", line=pos + 1)
        pos += 1
        return pos, lines[pos - 1].split()

    lineno, words = next_line()
    if words != ["IDSGRID1"]:
        raise ParseError(f"{path}: missing IDSGRID1 magic", line=lineno)
    for key in ("dim", "size", "origin", "spacing"):
        lineno, words = next_line()
        if not words or words[0] != key:
            raise ParseError(f"{path}: expected '{key}' header", line=lineno)
        try:
            header[key] = [float(w) for w in words[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}: bad number in '{key}' header", line=lineno) from exc
    dim = int(header["dim"][0]) if header["dim"] else 0
    if not 2 <= dim <= 3 or len(header["size"]) != dim or len(header["origin"]) != dim \
            or len(header["spacing"]) != 1:
        raise ParseError(f"{path}: inconsistent header", line=lineno)
    shape = tuple(int(s) for s in header["size"])
    spacing = header["spacing"][0]
    if min(shape) < 3 or not spacing > 0:
        raise ParseError(f"{path}: grid too small or non-positive spacing", line=lineno)
    count = int(np.prod(shape))
    packed, full = dim * (dim + 1) // 2, dim * dim
    g_rows = np.empty((count, dim, dim))
    p_rows = np.empty((count, dim, dim))
    for node in range(count):
        lineno, words = next_line()
        try:
            vals = np.array([float(w) for w in words])
        except ValueError as exc:
            raise ParseError(f"{path}: node {node}: bad number", line=lineno) from exc
        if not np.all(np.isfinite(vals)):
            raise ParseError(f"{path}: node {node}: non-finite entry", line=lineno)
        if len(vals) == 2 * packed:
            g_rows[node] = _unpack(vals[:packed], dim)
            p_rows[node] = _unpack(vals[packed:], dim)
        elif len(vals) == 2 * full:
            g_full = vals[:full].reshape(dim, dim)
            p_full = vals[full:].reshape(dim, dim)
            for name, mat in (("metric", g_full), ("p", p_full)):
                if not np.allclose(mat, mat.T, rtol=1e-12, atol=1e-14):
                    idx = np.unravel_index(node, shape)
                    raise ParseError(f"{path}: node {node} {idx}: {name} not symmetric", line=lineno)
            g_rows[node], p_rows[node] = g_full, p_full
        else:
            raise ParseError(f"{path}: node {node}: expected {2 * packed} or {2 * full} values,"
                             f" got {len(vals)}", line=lineno)
    if np.any(np.linalg.eigvalsh(g_rows)[:, 0] <= 0):
        bad = int(np.flatnonzero(np.linalg.eigvalsh(g_rows)[:, 0] <= 0)[0])
        raise ParseError(f"{path}: node {bad}: metric not positive definite")
    return GriddedData(header["origin"], spacing,
                       g_rows.reshape(shape + (dim, dim)), p_rows.reshape(shape + (dim, dim)))


def write_grid_file(path, ids: InitialDataSet, origin, spacing, shape):
    """Sample ids on a grid and write it in IDSGRID1 packed form."""
    dim = ids.dim
    axes = [origin[k] + spacing * np.arange(shape[k]) for k in range(dim)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    g, p = ids.metric(x), ids.tensor(x)
    idx = _packed_index(dim)
    rows = np.concatenate([np.stack([g[:, i, j] for i, j in idx], 1),
                           np.stack([p[:, i, j] for i, j in idx], 1)], axis=1)
    with open(path, "w") as fh:
        fh.write("IDSGRID1\n")
        fh.write(f"dim {dim}\n")
        fh.write("size " + " ".join(str(int(s)) for s in shape) + "\n")
        fh.write("origin " + " ".join(repr(float(o)) for o in origin) + "\n")
        fh.write(f"spacing {float(spacing)!r}\n")
        np.savetxt(fh, rows, fmt="%.17g")


# ---------------------------------------------------------------------------
# boundary shapes (signed distance, negative inside)
# ---------------------------------------------------------------------------

class Shape:
    def signed_distance(self, x):
        raise NotImplementedError


@dataclass
class Sphere(Shape):
    center: Sequence[float]
    radius: float

    def signed_distance(self, x):
        return np.linalg.norm(x - np.asarray(self.center, float), axis=-1) - self.radius


@dataclass
class Ellipsoid(Shape):
    """Approximate signed distance (first-order normalised implicit)."""

    center: Sequence[float]
    axes: Sequence[float]

    def signed_distance(self, x):
        a = np.asarray(self.axes, float)
        y = (x - np.asarray(self.center, float)) / a
        k0 = np.linalg.norm(y, axis=-1)
        k1 = np.linalg.norm(y / a, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            d = k0 * (k0 - 1) / k1
        return np.where(k1 > 0, d, -np.min(a))


@dataclass
class Union(Shape):
    parts: Sequence[Shape]

    def signed_distance(self, x):
        return np.min([s.signed_distance(x) for s in self.parts], axis=0)


@dataclass
class SampledField(Shape):
    """A level-set function given on the computational grid itself."""

    values: np.ndarray

    def signed_distance(self, x):
        return self.values


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

EXTERIOR, INTERIOR, GHOST_OUTER, GHOST_INNER = 0, 1, 2, 3


def _neighbour_any(mask):
    out = np.zeros_like(mask)
    for ax in range(mask.ndim):
        out[tuple(slice(1, None) if a == ax else slice(None) for a in range(mask.ndim))] |= \
            mask[tuple(slice(None, -1) if a == ax else slice(None) for a in range(mask.ndim))]
        out[tuple(slice(None, -1) if a == ax else slice(None) for a in range(mask.ndim))] |= \
            mask[tuple(slice(1, None) if a == ax else slice(None) for a in range(mask.ndim))]
    return out


class DomainGrid:
    """Uniform grid carrying Omega = {phi_outer < 0} & {phi_inner > 0}.

    ``phi_outer`` increases outward through the outer boundary and
    ``phi_inner`` increases into Omega through the inner boundary, so both
    gradients point toward the outer region (the direction the
    expansions are measured in).
    ``inner_parts`` keeps the separate inner level sets when the inner
    boundary is assembled from several trapped regions.
    """

    orientation = {"outer": "normal points out of Omega", "inner": "normal points into Omega"}

    def __init__(self, origin, spacing, shape, phi_outer, phi_inner, inner_parts=None,
                 check=True):
        self.origin = np.asarray(origin, float)
        self.h = float(spacing)
        self.shape = tuple(int(s) for s in shape)
        self.dim = len(self.shape)
        self.phi_outer = np.asarray(phi_outer, float)
        self.phi_inner = np.asarray(phi_inner, float)
        self.inner_parts = list(inner_parts) if inner_parts is not None else [self.phi_inner]
        inside = (self.phi_outer < 0) & (self.phi_inner > 0)
        # single hole nodes poking into Omega (the inner boundary grazing a node)
        # would carry two contact faces next to each other; absorb them
        hole = (self.phi_outer < 0) & ~inside
        hole_nbrs = sum(np.roll(hole, s, axis=ax).astype(int) for ax in range(self.dim) for s in (1, -1))
        tooth = hole & (hole_nbrs <= 1) & (self.phi_inner > -0.5 * self.h)
        inside |= tooth
        near = _neighbour_any(inside)
        mask = np.full(self.shape, EXTERIOR, np.int8)
        mask[inside] = INTERIOR
        mask[near & ~inside & (self.phi_outer >= 0)] = GHOST_OUTER
        mask[near & ~inside & (self.phi_outer < 0)] = GHOST_INNER
        self.mask = mask
        self.interior = inside
        self.index = np.full(self.shape, -1, np.int64)
        self.index[inside] = np.arange(int(inside.sum()))
        if check:
            self.validate()

    @property
    def axes(self):
        return [self.origin[k] + self.h * np.arange(self.shape[k]) for k in range(self.dim)]

    @property
    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @property
    def n_unknowns(self):
        return int(self.interior.sum())

    def separation(self):
        """Sampled estimate of dist(outer boundary, inner boundary)."""
        return float(np.min(np.abs(self.phi_outer) + np.abs(self.phi_inner)))

    def inner_component_count(self):
        holes = self.phi_inner <= 0
        return int(ndimage.label(holes)[1])

    def validate(self):
        if not self.interior.any():
            raise GeometryError("domain has no interior nodes")
        if np.isfinite(self.separation()) and self.separation() <= 4 * self.h:
            raise GeometryError(
                f"inner and outer boundaries within 4h (separation {self.separation():.4g})")
        if ndimage.label(self.interior)[1] != 1:
            raise GeometryError("domain interior is not connected")
        edge = np.zeros(self.shape, bool)
        for ax in range(self.dim):
            for sl in (slice(0, 2), slice(-2, None)):
                edge[tuple(sl if a == ax else slice(None) for a in range(self.dim))] = True
        if np.any(self.interior & edge):
            raise GeometryError("outer boundary closer than two nodes to the grid edge")

    def with_inner(self, phi_inner, inner_parts=None, check=True):
        return DomainGrid(self.origin, self.h, self.shape, self.phi_outer, phi_inner,
                          inner_parts, check)

    def to_grid(self, vec, fill=np.nan):
        out = np.full(self.shape, fill, float)
        out[self.interior] = vec
        return out


def grid_for_box(half_width, h, dim):
    """Origin and node count for a centred grid covering [-w, w]^dim."""
    count = int(np.ceil(2 * half_width / h - 1e-9)) + 1
    origin = -(count - 1) * h / 2
    return np.full(dim, origin), (count,) * dim


def build_domain(ids: InitialDataSet, outer: Shape, inner: Shape | None, h, half_width=None,
                 shape=None, origin=None, inner_parts=None):
    """Sample the boundary level sets on a uniform grid and label nodes."""
    dim = ids.dim
    if dim not in (2, 3):
        raise DataError("only n = 2 and n = 3 are discretised")
    if shape is None:
        if half_width is None:
            half_width = float(np.max(np.abs(np.concatenate(ids.box))))
        origin, shape = grid_for_box(half_width, h, dim)
    elif origin is None:
        origin = -(np.asarray(shape, float) - 1) * h / 2
    origin = np.broadcast_to(np.asarray(origin, float), (dim,))
    axes = [origin[k] + h * np.arange(shape[k]) for k in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    phi_outer = outer.signed_distance(pts)
    if inner is None:
        phi_inner = np.full(tuple(shape), np.inf)
        parts = []
    else:
        parts = inner_parts or (list(inner.parts) if isinstance(inner, Union) else [inner])
        parts = [p.signed_distance(pts) for p in parts]
        phi_inner = np.min(parts, axis=0)
    return DomainGrid(origin, h, shape, phi_outer, phi_inner, parts)
