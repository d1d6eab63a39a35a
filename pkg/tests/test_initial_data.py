import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jang_horizons.errors import DataError, DomainError, GeometryError, ParseError
from jang_horizons.initial_data import (GHOST_INNER, GHOST_OUTER, INTERIOR, Ellipsoid, Sphere, Union,
                                        build_domain, load_grid_file, make_family, pg_superposition,
                                        write_grid_file)


@pytest.mark.parametrize("tag", ["flat", "pg", "schwarzschild", "brill-lindquist"])
@pytest.mark.parametrize("dim", [2, 3])
def test_family_tensors_symmetric_and_metric_definite(tag, dim):
    ids = make_family(tag, dim=dim, half_width=4.0)
    rng = np.random.default_rng(1)
    x = rng.uniform(0.5, 3.0, (40, dim)) * rng.choice([-1, 1], (40, dim))
    g, p = ids.metric(x), ids.tensor(x)
    assert np.allclose(g, np.swapaxes(g, -1, -2))
    assert np.allclose(p, np.swapaxes(p, -1, -2))
    assert np.all(np.linalg.eigvalsh(g)[:, 0] > 0)


@pytest.mark.parametrize("tag", ["pg", "schwarzschild"])
def test_analytic_derivatives_match_differences(tag):
    ids = make_family(tag, dim=3, half_width=4.0)
    x = np.array([[0.7, -1.1, 0.9], [1.5, 0.2, -0.4]])
    step = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        dg = (ids.metric(x + e) - ids.metric(x - e)) / (2 * step)
        dp = (ids.tensor(x + e) - ids.tensor(x - e)) / (2 * step)
        assert np.allclose(ids.dmetric(x)[:, k], dg, atol=1e-6)
        assert np.allclose(ids.dtensor(x)[:, k], dp, atol=1e-6)


def test_points_outside_box_rejected():
    ids = make_family("flat", dim=2, half_width=1.0)
    with pytest.raises(DomainError):
        ids.metric(np.array([[2.0, 0.0]]))


def test_unknown_family():
    with pytest.raises(DataError):
        make_family("kerr")


def test_superposition_reduces_to_single_center():
    one = make_family("pg", dim=2, half_width=4.0)
    sup = pg_superposition([[0.0, 0.0]], [1.0], dim=2, half_width=4.0)
    x = np.array([[1.0, 0.5], [-2.0, 1.0]])
    assert np.allclose(one.tensor(x), sup.tensor(x))


def test_grid_file_round_trip(tmp_path):
    ids = make_family("schwarzschild", dim=2, half_width=4.0)
    path = tmp_path / "data.ids"
    # offset by half a cell so no node sits on the singular center
    write_grid_file(path, ids, origin=[-3.05, -3.05], spacing=0.1, shape=(62, 62))
    back = load_grid_file(path)
    x = np.array([[0.95, 0.95], [1.95, -0.45]])       # grid nodes
    assert np.allclose(back.metric(x), ids.metric(x), atol=1e-12)
    assert np.allclose(back.tensor(x), ids.tensor(x), atol=1e-12)


@pytest.mark.parametrize("text", ["", "IDSGRID2\n", "IDSGRID1\ndim 2\nsize 2 2\n"])
def test_grid_file_parse_errors(tmp_path, text):
    path = tmp_path / "bad.ids"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_grid_file(path)


def test_missing_grid_file():
    with pytest.raises(ParseError):
        load_grid_file("/nonexistent/data.ids")


def test_domain_labels():
    ids = make_family("pg", dim=2, half_width=4.0)
    grid = build_domain(ids, Sphere([0, 0], 3.0), Sphere([0, 0], 1.0), 0.1)
    r = np.linalg.norm(grid.points, axis=-1)
    assert np.all((r[grid.mask == INTERIOR] < 3.0) & (r[grid.mask == INTERIOR] >= 1.0 - 0.05))
    assert np.all(r[grid.mask == GHOST_OUTER] >= 3.0)
    assert np.all(r[grid.mask == GHOST_INNER] <= 1.0)
    assert grid.inner_component_count() == 1


def test_domain_with_boundaries_too_close():
    ids = make_family("pg", dim=2, half_width=4.0)
    with pytest.raises(GeometryError):
        build_domain(ids, Sphere([0, 0], 1.2), Sphere([0, 0], 1.0), 0.1)


def test_grazing_hole_node_joins_interior():
    # a circle through a grid node leaves a one-node tooth; it is absorbed
    ids = make_family("pg", dim=2, half_width=4.0)
    grid = build_domain(ids, Sphere([0, 0], 3.0), Union([Sphere([-0.1, 0], 0.8), Sphere([0.1, 0], 0.8)]), 0.05)
    hole = (grid.phi_outer < 0) & ~grid.interior
    nbrs = sum(np.roll(hole, s, axis=a).astype(int) for a in range(2) for s in (1, -1))
    assert not np.any(hole & (nbrs <= 1))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.5, 2.0), b=st.floats(0.5, 2.0), px=st.floats(-1, 1), py=st.floats(-1, 1))
def test_ellipsoid_distance_sign(a, b, px, py):
    shape = Ellipsoid([0.0, 0.0], [a, b])
    inside = (px / a) ** 2 + (py / b) ** 2 < 1
    d = shape.signed_distance(np.array([px, py]))
    assert (d < 0) == inside or abs(d) < 1e-9
