import numpy as np
import pytest

from jang_horizons.errors import DataError
from jang_horizons.initial_data import Sphere, build_domain, make_family
from jang_horizons.jang_core import GraphOperator, smoothstep


def small_grid(tag="pg", dim=2, h=0.1, inner=0.6, outer=2.0):
    ids = make_family(tag, dim=dim, half_width=outer + 1)
    return build_domain(ids, Sphere(np.zeros(dim), outer), Sphere(np.zeros(dim), inner), h), ids


def relative_fd_error(op, u, t, eps, rng, step=1e-6):
    _, J = op.residual(u, t, eps, with_jacobian=True)
    v = rng.standard_normal(len(u))
    fd = (op.residual(u + step * v, t, eps) - op.residual(u - step * v, t, eps)) / (2 * step)
    return np.linalg.norm(J @ v - fd) / np.linalg.norm(fd)


@pytest.mark.parametrize("mode", ["generalized", "mots"])
@pytest.mark.parametrize("dim", [2, 3])
def test_jacobian_matches_differences(mode, dim):
    grid, ids = small_grid(dim=dim, h=0.2 if dim == 3 else 0.1)
    op = GraphOperator(grid, ids, mode)
    rng = np.random.default_rng(3)
    pts = grid.points[grid.interior]
    r = np.linalg.norm(pts, axis=1)
    u = -2 * (2.0 - r) + 0.1 * rng.standard_normal(len(r))
    assert relative_fd_error(op, u, 0.1, 0.04, rng) < 1e-4


def test_flat_planes_have_zero_curvature():
    grid, ids = small_grid("flat")
    op = GraphOperator(grid, ids)
    pts = grid.points[grid.interior]
    H = op.mean_curvature(0.3 * pts[:, 0] - 0.2 * pts[:, 1])
    # only nodes away from both boundaries see pure interior stencils
    r = np.linalg.norm(pts, axis=1)
    far = (r > 0.6 + 0.3) & (r < 2.0 - 0.3)
    assert np.max(np.abs(H[far])) < 1e-10


def test_paraboloid_curvature_converges():
    errs = []
    for h in (0.1, 0.05):
        grid, ids = small_grid("flat", h=h)
        op = GraphOperator(grid, ids)
        pts = grid.points[grid.interior]
        q = 0.5 * np.sum(pts ** 2, axis=1)
        H = op.mean_curvature(q)
        r2 = np.sum(pts ** 2, axis=1)
        exact = (2 + r2) / (1 + r2) ** 1.5     # div(grad q / sqrt(1 + |grad q|^2)) in 2D
        r = np.sqrt(r2)
        far = (r > 1.0) & (r < 1.6)
        errs.append(np.max(np.abs(H[far] - exact[far])))
    assert errs[1] < 0.35 * errs[0]


def test_dimension_mismatch():
    grid, _ = small_grid()
    with pytest.raises(DataError):
        GraphOperator(grid, make_family("pg", dim=3, half_width=3.0))


def test_unknown_mode():
    grid, ids = small_grid()
    with pytest.raises(DataError):
        GraphOperator(grid, ids, "bogus")


def test_smoothstep_endpoints():
    assert smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])).tolist() == [0.0, 0.0, 0.5, 1.0, 1.0]
