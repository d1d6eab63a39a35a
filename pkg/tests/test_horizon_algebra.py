import numpy as np
import pytest

from jang_horizons.errors import GeometryError
from jang_horizons.horizon_algebra import TrappedDomain, intersect_domains, mots_cutoff, outermost
from jang_horizons.initial_data import Sphere, build_domain, make_family


@pytest.fixture(scope="module")
def base():
    ids = make_family("pg", dim=2, half_width=4.0)
    return build_domain(ids, Sphere([0, 0], 3.0), Sphere([0, 0], 1.0), 0.05), ids


def disk(grid, x, r):
    return TrappedDomain.from_shape(grid, Sphere([x, 0.0], r))


def test_intersection_keeps_one_part_per_domain(base):
    grid, _ = base
    A, B = disk(grid, -0.1, 0.8), disk(grid, 0.1, 0.8)
    both = intersect_domains(A, B)
    assert len(both.inner_parts) == 2
    assert np.array_equal(both.phi_inner, np.minimum(A.phi, B.phi))
    assert len(intersect_domains(A, A).inner_parts) == 1


def test_intersection_enclosed_region_is_union(base):
    grid, _ = base
    A, B = disk(grid, -0.5, 0.6), disk(grid, 0.5, 0.6)
    both = intersect_domains(A, B)
    assert np.array_equal(both.phi_inner <= 0, A.enclosed | B.enclosed)


def test_intersection_requires_common_outer_boundary(base):
    grid, ids = base
    other = build_domain(ids, Sphere([0, 0], 2.5), Sphere([0, 0], 1.0), 0.05)
    with pytest.raises(GeometryError):
        intersect_domains(disk(grid, 0, 1), disk(other, 0, 1))


def test_intersection_without_interior(base):
    grid, _ = base
    with pytest.raises(GeometryError):
        intersect_domains(disk(grid, 0, 0.5), disk(grid, 0, 3.2))


def test_mask_and_mesh_constructors(base):
    grid, _ = base
    with pytest.raises(GeometryError):
        TrappedDomain.from_mask(grid, np.zeros((3, 3), bool))
    far = np.array([[10.0, 10.0], [10.1, 10.0], [10.0, 10.1]])
    with pytest.raises(GeometryError):
        TrappedDomain.from_mesh(grid, far, np.array([[0, 1], [1, 2], [2, 0]]))
    a = np.linspace(0, 2 * np.pi, 120, endpoint=False)
    idx = np.arange(120)
    dom = TrappedDomain.from_mesh(grid, np.column_stack([np.cos(a), np.sin(a)]),
                                  np.column_stack([idx, np.roll(idx, -1)]))
    r = np.linalg.norm(grid.points, axis=-1)
    ring = np.abs(r - 1.5) < 0.2
    assert np.allclose(dom.phi[ring], r[ring] - 1.0, atol=1e-3)


def test_cutoff_profile(base):
    grid, ids = base
    phi = mots_cutoff(grid, ids)
    d1 = -grid.phi_outer[grid.interior]
    assert phi.min() >= 0 and phi.max() <= 1
    assert np.all(phi[d1 < 0.2 * grid.separation()] == 0)
    assert np.all(phi[d1 > 0.8 * grid.separation()] == 1)


def test_outermost_needs_seeds(base):
    grid, ids = base
    with pytest.raises(GeometryError):
        outermost(grid, ids, [])
