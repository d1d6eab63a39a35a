import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.measure import marching_cubes

from jang_horizons.errors import GeometryError
from jang_horizons.horizon_geometry import (coincidence_check, element_measures, horizon_defect,
                                            horizon_residual, is_closed, is_embedded,
                                            mesh_inside_mask, outer_minimizing_probe, read_mesh,
                                            surface_from_mesh, write_mesh)
from jang_horizons.initial_data import Sphere, build_domain, make_family
from jang_horizons.spherical_oracle import radial_profile, radial_scalars


def circle(r, n=200, center=(0.0, 0.0)):
    a = np.linspace(0, 2 * np.pi, n, endpoint=False)
    v = np.column_stack([r * np.cos(a), r * np.sin(a)]) + center
    idx = np.arange(n)
    return v, np.column_stack([idx, np.roll(idx, -1)])


def sphere_mesh(r, step=0.1):
    x = np.arange(-r - 2 * step, r + 2 * step + 1e-9, step)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    verts, faces, _, _ = marching_cubes(np.sqrt(X ** 2 + Y ** 2 + Z ** 2) - r, 0.0, spacing=(step,) * 3)
    return verts + x[0], faces


def test_polyline_round_trip(tmp_path):
    v, c = circle(1.0, 50)
    v2, c2 = circle(0.5, 30, (3.0, 0.0))
    verts, cells = np.vstack([v, v2]), np.vstack([c, c2 + 50])
    write_mesh(tmp_path / "h.mesh", verts, cells)
    back_v, back_c = read_mesh(tmp_path / "h.mesh")
    # the first vertex "1 0" must not be mistaken for a triangle-mesh header
    assert np.allclose(back_v, verts) and np.array_equal(back_c, cells)


def test_triangle_round_trip(tmp_path):
    v, f = sphere_mesh(1.0, 0.25)
    write_mesh(tmp_path / "s.mesh", v, f)
    back_v, back_f = read_mesh(tmp_path / "s.mesh")
    assert np.allclose(back_v, v, atol=1e-8) and np.array_equal(back_f, f)


def test_truncated_and_empty_files(tmp_path):
    (tmp_path / "t.mesh").write_text("4 4\n0 0 0\n")
    (tmp_path / "e.mesh").write_text("\n\n")
    for name in ("t.mesh", "e.mesh"):
        with pytest.raises(GeometryError):
            read_mesh(tmp_path / name)


def test_closed_and_embedded():
    v, c = circle(1.0, 40)
    assert is_closed(c, len(v), 2) and is_embedded(v, c, 2)
    assert not is_closed(c[:-1], len(v), 2)
    # a figure eight crosses itself
    a = np.linspace(0, 2 * np.pi, 80, endpoint=False)
    eight = np.column_stack([np.sin(a), np.sin(a) * np.cos(a)])
    idx = np.arange(80)
    assert not is_embedded(eight, np.column_stack([idx, np.roll(idx, -1)]), 2)
    sv, sf = sphere_mesh(1.0, 0.25)
    assert is_closed(sf, len(sv), 3) and is_embedded(sv, sf, 3)


@settings(max_examples=20, deadline=None)
@given(r=st.floats(0.3, 3.0))
def test_flat_circle_length(r):
    v, c = circle(r, 400)
    ids = make_family("flat", dim=2, half_width=4.0)
    assert element_measures(ids, v, c).sum() == pytest.approx(2 * np.pi * r, rel=1e-4)


def test_flat_sphere_area():
    v, f = sphere_mesh(1.0, 0.05)
    ids = make_family("flat", dim=3, half_width=2.0)
    assert element_measures(ids, v, f).sum() == pytest.approx(4 * np.pi, rel=0.01)


@pytest.fixture(scope="module")
def pg_grid():
    ids = make_family("pg", dim=2, half_width=4.0)
    return build_domain(ids, Sphere([0, 0], 3.5), Sphere([0, 0], 1.0), 0.05), ids


def test_inside_mask(pg_grid):
    grid, _ = pg_grid
    v, c = circle(2.0, 300)
    inside = mesh_inside_mask(grid, v, c)
    r = np.linalg.norm(grid.points, axis=-1)
    assert np.all(inside[r < 1.98]) and not np.any(inside[r > 2.02])


def test_horizon_circle_has_small_residual(pg_grid):
    grid, ids = pg_grid
    good = surface_from_mesh(*circle(2.0, 300), grid, ids)
    bad = surface_from_mesh(*circle(2.6, 300), grid, ids)
    assert horizon_residual(good) < 0.05
    H, T = radial_scalars(radial_profile("pg", 1.0, 2), np.array([2.6]))
    exact = abs(horizon_defect(H, T)[0])
    assert horizon_residual(bad) == pytest.approx(exact, abs=0.02)
    assert coincidence_check(good) == ["disjoint"]


def test_round_circle_is_outer_minimizing(pg_grid):
    grid, ids = pg_grid
    surf = surface_from_mesh(*circle(2.0, 300), grid, ids)
    rep = outer_minimizing_probe(surf, ids, trials=20, seed=1)
    assert rep.passed
